#include "eqmo/polynomial.hpp"

#include <algorithm>
#include <cmath>

namespace eqmo {

Polynomial::Polynomial(std::initializer_list<double> coeffs) : coeffs_(coeffs) { trim(); }

Polynomial::Polynomial(std::vector<double> coeffs) : coeffs_(std::move(coeffs)) { trim(); }

Polynomial Polynomial::monomial(double c, std::size_t power) {
  std::vector<double> coeffs(power + 1, 0.0);
  coeffs[power] = c;
  return Polynomial(std::move(coeffs));
}

void Polynomial::trim() {
  while (!coeffs_.empty() && coeffs_.back() == 0.0) coeffs_.pop_back();
}

double Polynomial::operator()(double x) const noexcept {
  double acc = 0.0;
  for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it) acc = acc * x + *it;
  return acc;
}

Polynomial Polynomial::derivative() const {
  if (coeffs_.size() <= 1) return {};
  std::vector<double> d(coeffs_.size() - 1);
  for (std::size_t k = 1; k < coeffs_.size(); ++k) d[k - 1] = static_cast<double>(k) * coeffs_[k];
  return Polynomial(std::move(d));
}

Polynomial Polynomial::compose(const Polynomial& inner) const {
  Polynomial out;
  for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it) {
    out = out * inner;
    out += Polynomial::constant(*it);
  }
  return out;
}

Polynomial& Polynomial::operator+=(const Polynomial& rhs) {
  if (rhs.coeffs_.size() > coeffs_.size()) coeffs_.resize(rhs.coeffs_.size(), 0.0);
  for (std::size_t k = 0; k < rhs.coeffs_.size(); ++k) coeffs_[k] += rhs.coeffs_[k];
  trim();
  return *this;
}

Polynomial& Polynomial::operator*=(double s) {
  for (double& c : coeffs_) c *= s;
  trim();
  return *this;
}

Polynomial operator*(const Polynomial& lhs, const Polynomial& rhs) {
  if (lhs.is_zero() || rhs.is_zero()) return {};
  std::vector<double> out(lhs.coeffs_.size() + rhs.coeffs_.size() - 1, 0.0);
  for (std::size_t i = 0; i < lhs.coeffs_.size(); ++i)
    for (std::size_t j = 0; j < rhs.coeffs_.size(); ++j) out[i + j] += lhs.coeffs_[i] * rhs.coeffs_[j];
  return Polynomial(std::move(out));
}

namespace {

// Scale used to decide that a value is "zero" relative to the coefficients.
double magnitude_at(const Polynomial& p, double x) {
  double acc = 0.0;
  double xp = 1.0;
  for (double c : p.coeffs()) {
    acc += std::abs(c) * xp;
    xp *= std::abs(x);
  }
  return acc;
}

// p has a sign change (or a zero end) on [a, b]; p is monotone there.
double refine_root(const Polynomial& p, const Polynomial& dp, double a, double b) {
  double fa = p(a);
  double fb = p(b);
  if (fa == 0.0) return a;
  if (fb == 0.0) return b;
  double x = 0.5 * (a + b);
  for (int iter = 0; iter < 200; ++iter) {
    const double fx = p(x);
    if (fx == 0.0) return x;
    if ((fx < 0.0) == (fa < 0.0)) {
      a = x;
      fa = fx;
    } else {
      b = x;
    }
    const double d = dp(x);
    double next = (d != 0.0) ? x - fx / d : 0.5 * (a + b);
    if (!(next > a && next < b)) next = 0.5 * (a + b);
    const double step = std::abs(next - x);
    x = next;
    if (step <= 1e-15 * std::max(1.0, std::abs(x)) || (b - a) <= 1e-15 * std::max(1.0, std::abs(x))) break;
  }
  return x;
}

}  // namespace

std::vector<double> Polynomial::real_roots(double lo, double hi) const {
  std::vector<double> roots;
  if (is_zero() || degree() == 0 || lo > hi) return roots;
  if (degree() == 1) {
    const double r = -coeffs_[0] / coeffs_[1];
    if (r >= lo && r <= hi) roots.push_back(r);
    return roots;
  }

  const Polynomial dp = derivative();
  std::vector<double> knots{lo};
  for (double c : dp.real_roots(lo, hi))
    if (c > knots.back()) knots.push_back(c);
  if (hi > knots.back()) knots.push_back(hi);

  auto near_zero = [&](double x) { return std::abs((*this)(x)) <= 1e-13 * magnitude_at(*this, x); };
  auto push = [&](double r) {
    if (roots.empty() || std::abs(r - roots.back()) > 1e-12 * std::max(1.0, std::abs(r))) roots.push_back(r);
  };

  for (std::size_t k = 0; k + 1 < knots.size(); ++k) {
    const double a = knots[k];
    const double b = knots[k + 1];
    const double fa = (*this)(a);
    const double fb = (*this)(b);
    if (near_zero(a)) push(a);
    if ((fa < 0.0 && fb > 0.0) || (fa > 0.0 && fb < 0.0)) push(refine_root(*this, dp, a, b));
  }
  if (knots.size() >= 1 && near_zero(knots.back())) push(knots.back());
  return roots;
}

}  // namespace eqmo
