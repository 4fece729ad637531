#pragma once

// Scenario and objective data model, validation, and moment/cumulant algebra.

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "eqmo/error.hpp"

namespace eqmo {

inline constexpr int kMaxOrder = 8;

/// Market primitives on a uniform grid t_i = i * T / grid_n, i = 0..grid_n.
/// Parameters are piecewise constant: the value at t_i holds on [t_i, t_{i+1}).
struct MarketScenario {
  std::vector<double> r;      ///< risk-free rate (1/year)
  std::vector<double> theta;  ///< risk premium (1/year)
  std::vector<double> sigma;  ///< volatility (1/sqrt-year)
  double T = 1.0;
  double x0 = 1.0;
  std::size_t grid_n = 100;
  double sigma_min = 1e-8;

  /// Scenario with constant parameters.
  static MarketScenario constant(double r, double theta, double sigma, double T, double x0, std::size_t grid_n);

  double dt() const noexcept { return T / static_cast<double>(grid_n); }
  double time(std::size_t i) const noexcept { return static_cast<double>(i) * dt(); }
  std::vector<double> times() const;
  /// Grid index of `t`, or OffGridTime when `t` is not a grid point (relative tol 1e-9).
  std::size_t grid_index(double t) const;
};

enum class MomentMode { central, cumulant };

/// One monomial of the objective: `coeff * prod_k q_k^{exponents[k]}`, with
/// q_1 = m1 and q_k (k >= 2) the k-th central moment or cumulant per mode.
/// exponents[0] is unused.
struct ObjectiveTerm {
  std::array<int, kMaxOrder + 1> exponents{};
  double coeff = 0.0;

  int exponent(int k) const { return exponents[static_cast<std::size_t>(k)]; }
  bool involves(int k) const { return exponent(k) > 0; }
  int total_degree() const;
};

/// Sparse polynomial objective over (m1, q_2..q_n).
struct ObjectiveSpec {
  MomentMode mode = MomentMode::central;
  int max_order = 2;
  std::vector<ObjectiveTerm> terms;

  /// J = m1 + sum_k weights[k] * q_k; weights indexed by k, entries 0/1 ignored.
  static ObjectiveSpec linear(MomentMode mode, std::span<const double> weights);
  /// J = m1 - gamma2 * m2.
  static ObjectiveSpec mean_variance(double gamma2);

  /// Adds `coeff * prod q_k^e` from (k, e) pairs.
  ObjectiveSpec& add_term(std::initializer_list<std::pair<int, int>> factors, double coeff);

  /// Evaluates J at q, where q[1] = m1 and q[k] for k = 2..max_order.
  double evaluate(std::span<const double> q) const;
  /// dJ/dq_k at q.
  double partial(int k, std::span<const double> q) const;
  /// Coefficient of the pure linear m1 term.
  double mean_weight() const;
  /// Coefficient of the pure linear q_k term.
  double linear_weight(int k) const;
};

/// Piecewise-constant open-loop control. `values[i]` holds on [t_i, t_{i+1});
/// `values[grid_n]` is the control at the horizon itself.
struct StrategyGrid {
  std::vector<double> times;
  std::vector<double> values;

  std::size_t size() const noexcept { return values.size(); }
  StrategyGrid scaled(double factor) const;
};

StrategyGrid constant_strategy(const MarketScenario& scenario, double value);

struct ValidatedScenario {
  MarketScenario scenario;
  ObjectiveSpec objective;
};

/// Checks every invariant of the pair and fills defaults. Throws Error with the
/// full diagnostic list; the error code is that of the first violation.
ValidatedScenario validate_scenario(const MarketScenario& scenario, const ObjectiveSpec& objective);
void validate_strategy(const MarketScenario& scenario, const StrategyGrid& strategy);

/// Integral of the piecewise-constant rate over [t1, t2].
double rate_integral(const MarketScenario& scenario, double t1, double t2);
/// R(t_i) = integral of r over [t_i, T] for every grid index, accumulated backward.
std::vector<double> rate_to_horizon(const MarketScenario& scenario);

/// Central moments m2..mn to cumulants k2..kn (input/output index 0 is order 2).
std::vector<double> moments_to_cumulants(std::span<const double> central);
std::vector<double> cumulants_to_moments(std::span<const double> cumulants);

/// (k-1)!! for even k, 0 for odd k: the Gaussian central moment at unit variance.
double gaussian_moment_factor(int k);

}  // namespace eqmo
