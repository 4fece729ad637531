#pragma once

// Conditional moments of terminal wealth under deterministic open-loop
// strategies, objective evaluation, and the Monte Carlo oracle.
//
// Wealth follows dX = (r X + theta u) dt + sigma u dW. With piecewise-constant
// parameters and control, X_T given X_t = x is Gaussian with
//   m1 = x e^{R(t)} + sum_{i >= t} e^{R(t_i)} theta_i u_i dt
//   V  = sum_{i >= t} e^{2 R(t_i)} sigma_i^2 u_i^2 dt
// where R(t) is the integrated rate from t to T.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "eqmo/model.hpp"

namespace eqmo {

struct MomentVector {
  int order = 2;
  double m1 = 0.0;
  double V = 0.0;
  std::vector<double> central;   ///< index k = order k (entries 0, 1 unused)
  std::vector<double> cumulant;  ///< index k = order k (entries 0, 1 unused)

  double central_moment(int k) const { return central.at(static_cast<std::size_t>(k)); }
  double cumulant_of(int k) const { return cumulant.at(static_cast<std::size_t>(k)); }
  /// (m1, q_2..q_n) in the layout ObjectiveSpec::evaluate expects.
  std::vector<double> objective_arguments(MomentMode mode) const;
};

struct McEstimate {
  MomentVector moments;
  double m1_standard_error = 0.0;
  std::vector<double> standard_errors;  ///< per central moment, index k = order k
  std::size_t paths = 0;
  std::uint64_t seed = 0;
};

struct McOptions {
  std::size_t paths = 100000;
  std::uint64_t seed = 42;
  std::size_t batches = 20;
  std::size_t workers = 0;  ///< 0 = default_workers()
};

/// m_k = (k-1)!! V^{k/2} for even k, 0 for odd k; result index 0 is order 2.
std::vector<double> gaussian_central_moments(double V, int n);

/// Moments of X_T given X_{t_i} = x, by grid index.
MomentVector conditional_moments(const MarketScenario& scenario, const StrategyGrid& strategy, std::size_t index,
                                 double x, int n);
/// Same, with `t` required to be a grid time.
MomentVector conditional_moments(const MarketScenario& scenario, const StrategyGrid& strategy, double t, double x,
                                 int n);

/// Variance-to-go V(t_i) for every grid index.
std::vector<double> variance_to_go(const MarketScenario& scenario, const StrategyGrid& strategy);

/// Builds a MomentVector from sample central moments (index k = order k).
MomentVector moment_vector_from_central(double m1, std::span<const double> central, int n);

double objective_value(const ObjectiveSpec& objective, const MomentVector& mv);

/// Simulates X_T from (t, x) with exact per-step Gaussian transitions
/// X_{i+1} = e^{r_i dt} (X_i + theta_i u_i dt + sigma_i u_i dW_i).
/// Standard errors come from the spread of per-batch estimates.
McEstimate mc_conditional_moments(const MarketScenario& scenario, const StrategyGrid& strategy, double t, double x,
                                  int n, const McOptions& options);

}  // namespace eqmo
