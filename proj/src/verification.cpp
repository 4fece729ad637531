#include "eqmo/verification.hpp"

#include <cmath>
#include <limits>

#include "eqmo/moments.hpp"

namespace eqmo {

EquilibriumReport equilibrium_report(const MarketScenario& scenario, const ObjectiveSpec& objective,
                                     const StrategyGrid& strategy, const std::vector<double>& v_grid,
                                     double tolerance) {
  if (v_grid.empty()) throw Error(ErrorCode::EmptyVGrid, "deviation grid is empty");
  validate_strategy(scenario, strategy);

  EquilibriumReport report;
  report.tolerance = tolerance;
  report.max_phi = -std::numeric_limits<double>::infinity();
  report.per_t_summary.reserve(scenario.grid_n + 1);
  for (std::size_t i = 0; i <= scenario.grid_n; ++i) {
    const PhiPolynomial phi = phi_polynomial(scenario, objective, strategy, i);
    // Phi(t, 0) = 0 always.
    PhiWitness best{phi.t, i, 0.0, 0.0};
    auto consider = [&](double v) {
      const double value = phi.poly(v);
      if (value > best.phi) best = {phi.t, i, v, value};
    };
    for (double v : v_grid) consider(v);
    if (phi.D_eff < 0.0) consider(-phi.poly.coeff(1) / (2.0 * phi.D_eff));
    report.per_t_summary.push_back({phi.t, best.phi});
    if (best.phi > report.max_phi) {
      report.max_phi = best.phi;
      report.witness = best;
    }
  }
  report.pass = report.max_phi <= tolerance;
  if (report.pass) report.witness.reset();
  return report;
}

std::vector<double> finite_eps_check(const MarketScenario& scenario, const ObjectiveSpec& objective,
                                     const StrategyGrid& strategy, double t, double v,
                                     const std::vector<double>& eps_list) {
  validate_strategy(scenario, strategy);
  const std::size_t start = scenario.grid_index(t);
  const int order = std::max(2, objective.max_order);
  const double base = objective_value(objective, conditional_moments(scenario, strategy, start, scenario.x0, order));
  const double dt = scenario.dt();

  std::vector<double> slopes;
  slopes.reserve(eps_list.size());
  for (double eps : eps_list) {
    const double steps_real = eps / dt;
    const double steps_round = std::round(steps_real);
    if (!(steps_round >= 1.0) || std::abs(steps_real - steps_round) > 1e-9 * steps_round)
      throw Error(ErrorCode::EpsNotOnGrid, "eps must be a positive multiple of dt");
    const auto steps = static_cast<std::size_t>(steps_round);
    if (start + steps > scenario.grid_n) throw Error(ErrorCode::EpsNotOnGrid, "t + eps exceeds the horizon");
    StrategyGrid perturbed = strategy;
    for (std::size_t i = start; i < start + steps; ++i) perturbed.values[i] += v;
    const double value =
        objective_value(objective, conditional_moments(scenario, perturbed, start, scenario.x0, order));
    slopes.push_back((value - base) / (static_cast<double>(steps) * dt));
  }
  return slopes;
}

}  // namespace eqmo
