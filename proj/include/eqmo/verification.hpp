#pragma once

#include <optional>
#include <string>
#include <vector>

#include "eqmo/equilibrium.hpp"
#include "eqmo/model.hpp"

namespace eqmo {

struct TimeSummary {
  double t = 0.0;
  double max_phi = 0.0;
};

/// Outcome of checking Phi(t, v) <= tolerance over every grid time and deviation.
struct EquilibriumReport {
  bool pass = true;
  double max_phi = 0.0;
  std::optional<PhiWitness> witness;
  std::vector<TimeSummary> per_t_summary;
  std::string convention{kPerturbationConvention};
  double tolerance = 0.0;
};

/// Evaluates Phi on the grid of deviations and, where Phi is strictly concave in
/// v, at its continuous maximiser. The witness is the first (t, v) attaining the
/// overall maximum.
EquilibriumReport equilibrium_report(const MarketScenario& scenario, const ObjectiveSpec& objective,
                                     const StrategyGrid& strategy, const std::vector<double>& v_grid,
                                     double tolerance);

/// Difference quotients (J(u + v 1_[t, t+eps)) - J(u)) / eps, with J evaluated
/// exactly by the moment engine at (t, x0). Every eps must be a multiple of dt
/// and t + eps <= T.
std::vector<double> finite_eps_check(const MarketScenario& scenario, const ObjectiveSpec& objective,
                                     const StrategyGrid& strategy, double t, double v,
                                     const std::vector<double>& eps_list);

}  // namespace eqmo
