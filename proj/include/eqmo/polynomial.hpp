#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

namespace eqmo {

/// Dense univariate polynomial with real coefficients, `coeffs()[k]` multiplies x^k.
/// Trailing zeros are trimmed so `degree()` is exact; the zero polynomial has no
/// coefficients and degree -1.
class Polynomial {
 public:
  Polynomial() = default;
  Polynomial(std::initializer_list<double> coeffs);
  explicit Polynomial(std::vector<double> coeffs);

  static Polynomial constant(double c) { return Polynomial({c}); }
  static Polynomial monomial(double c, std::size_t power);

  const std::vector<double>& coeffs() const noexcept { return coeffs_; }
  int degree() const noexcept { return static_cast<int>(coeffs_.size()) - 1; }
  bool is_zero() const noexcept { return coeffs_.empty(); }
  /// Coefficient of x^k, zero beyond the degree.
  double coeff(std::size_t k) const noexcept { return k < coeffs_.size() ? coeffs_[k] : 0.0; }

  double operator()(double x) const noexcept;
  Polynomial derivative() const;
  /// p(q(x)).
  Polynomial compose(const Polynomial& inner) const;

  Polynomial& operator+=(const Polynomial& rhs);
  Polynomial& operator*=(double s);
  friend Polynomial operator+(Polynomial lhs, const Polynomial& rhs) { return lhs += rhs; }
  friend Polynomial operator*(Polynomial lhs, double s) { return lhs *= s; }
  friend Polynomial operator*(const Polynomial& lhs, const Polynomial& rhs);
  friend bool operator==(const Polynomial&, const Polynomial&) = default;

  /// All real roots in [lo, hi], ascending, each refined to ~1e-12 relative.
  /// Roots are bracketed between consecutive critical points (found recursively
  /// from the derivative), then refined by bisection-safeguarded Newton.
  /// Multiple roots are reported once. The zero polynomial yields no roots.
  std::vector<double> real_roots(double lo, double hi) const;

 private:
  void trim();
  std::vector<double> coeffs_;
};

}  // namespace eqmo
