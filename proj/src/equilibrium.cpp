#include "eqmo/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "eqmo/moments.hpp"

namespace eqmo {

std::string_view to_string(Scheme scheme) {
  return scheme == Scheme::explicit_scheme ? "explicit" : "implicit";
}

Polynomial risk_slope_polynomial(const ObjectiveSpec& objective) {
  Polynomial D;
  for (const auto& term : objective.terms) {
    if (term.coeff == 0.0) continue;
    if (term.involves(1) && term.total_degree() > 1)
      throw Error(ErrorCode::NonAffineMeanTerm, "m1 multiplies a higher moment");
    for (int k = 2; k <= kMaxOrder; ++k) {
      const int e = term.exponent(k);
      if (e == 0) continue;
      if (objective.mode == MomentMode::cumulant && k != 2) continue;
      if (objective.mode == MomentMode::central && k % 2 != 0) continue;
      // Partial in q_k, then substitute the Gaussian values q_j(V).
      double c = term.coeff * e;
      int power = 0;
      bool vanishes = false;
      for (int j = 2; j <= kMaxOrder; ++j) {
        const int p = term.exponent(j) - (j == k ? 1 : 0);
        if (p == 0) continue;
        if (objective.mode == MomentMode::cumulant) {
          if (j != 2) vanishes = true;
          power += p;
        } else {
          if (j % 2 != 0) vanishes = true;
          c *= std::pow(gaussian_moment_factor(j), p);
          power += p * j / 2;
        }
      }
      if (vanishes) continue;
      // dq_k/dV: 1 for kappa_2, c_k (k/2) V^{k/2-1} for central m_k.
      if (objective.mode == MomentMode::central) {
        c *= gaussian_moment_factor(k) * (k / 2);
        power += k / 2 - 1;
      }
      D += Polynomial::monomial(c, static_cast<std::size_t>(power));
    }
  }
  return D;
}

namespace {

double variance_sensitivity(const ObjectiveSpec& objective, const std::vector<double>& q, double V) {
  if (objective.mode == MomentMode::cumulant) return objective.partial(2, q);
  double D = 0.0;
  for (int k = 2; k <= objective.max_order; k += 2)
    D += objective.partial(k, q) * gaussian_moment_factor(k) * (k / 2) * std::pow(V, k / 2 - 1);
  return D;
}

struct StepCoefficients {
  double drift_gain;  // f_m1 e^{R} theta
  double var_gain;    // e^{2R} sigma^2
  double step;        // dt, or 0 at the horizon
};

StepCoefficients step_coefficients(const MarketScenario& scenario, const ObjectiveSpec& objective, double R,
                                   std::size_t index) {
  const double growth = std::exp(R);
  const double sigma = scenario.sigma[index];
  return {objective.mean_weight() * growth * scenario.theta[index], growth * growth * sigma * sigma,
          index < scenario.grid_n ? scenario.dt() : 0.0};
}

std::string candidates_text(const std::vector<double>& roots) {
  std::ostringstream out;
  out.precision(17);
  out << "[";
  for (std::size_t i = 0; i < roots.size(); ++i) out << (i ? ", " : "") << roots[i];
  out << "]";
  return out.str();
}

double solve_step(const StepCoefficients& c, const Polynomial& slope, double future_variance, double prev_value,
                  Scheme scheme) {
  if (c.drift_gain == 0.0) return 0.0;
  const double D_future = slope(future_variance);

  if (scheme == Scheme::explicit_scheme) {
    if (D_future == 0.0) throw Error(ErrorCode::NoSecondOrderTerm, "variance sensitivity D vanishes");
    const double u = -c.drift_gain / (2.0 * D_future * c.var_gain);
    if (D_future > 0.0)
      throw Error(ErrorCode::AmbiguousRoot,
                  "stationary point is a minimiser (D > 0); candidates " + candidates_text({u}));
    return u;
  }

  if (slope.is_zero()) throw Error(ErrorCode::NoSecondOrderTerm, "variance sensitivity D vanishes");
  // g(u) = drift_gain + 2 var_gain u D(V+ + step var_gain u^2)
  const Polynomial variance_of_u{future_variance, 0.0, c.step * c.var_gain};
  const Polynomial g = Polynomial{c.drift_gain} + Polynomial{0.0, 2.0 * c.var_gain} * slope.compose(variance_of_u);
  const double scale = D_future != 0.0 ? std::abs(c.drift_gain / (2.0 * D_future * c.var_gain)) : 1.0;
  const double bound = 1e6 * scale + 1.0;
  const std::vector<double> roots = g.real_roots(-bound, bound);
  if (roots.empty()) throw Error(ErrorCode::NoRealRoot, "stationarity polynomial has no real root");
  std::optional<double> best;
  for (double u : roots) {
    if (slope(variance_of_u(u)) > 0.0) continue;
    if (!best || std::abs(u - prev_value) < std::abs(*best - prev_value)) best = u;
  }
  if (!best)
    throw Error(ErrorCode::AmbiguousRoot, "no root on the maximiser branch D <= 0; candidates " +
                                              candidates_text(roots));
  return *best;
}

}  // namespace

PhiPolynomial phi_polynomial(const MarketScenario& scenario, const ObjectiveSpec& objective,
                             const StrategyGrid& strategy, std::size_t index) {
  if (index > scenario.grid_n) throw Error(ErrorCode::OffGridTime, "grid index beyond the horizon");
  for (const auto& term : objective.terms)
    if (term.involves(1) && term.total_degree() > 1)
      throw Error(ErrorCode::NonAffineMeanTerm, "m1 multiplies a higher moment");
  const int order = std::max(2, objective.max_order);
  const MomentVector mv = conditional_moments(scenario, strategy, index, scenario.x0, order);
  const std::vector<double> q = mv.objective_arguments(objective.mode);
  const double R = rate_integral(scenario, scenario.time(index), scenario.T);
  const double growth = std::exp(R);
  const double sigma = scenario.sigma[index];
  const double var_gain = growth * growth * sigma * sigma;
  const double u = strategy.values[index];

  PhiPolynomial phi;
  phi.t = scenario.time(index);
  phi.index = index;
  phi.variance = mv.V;
  phi.D = variance_sensitivity(objective, q, mv.V);
  phi.D_eff = phi.D * var_gain;
  const double first = objective.partial(1, q) * growth * scenario.theta[index] + 2.0 * phi.D_eff * u;
  phi.poly = Polynomial{0.0, first, phi.D_eff};
  return phi;
}

PhiPolynomial phi_polynomial(const MarketScenario& scenario, const ObjectiveSpec& objective,
                             const StrategyGrid& strategy, double t) {
  return phi_polynomial(scenario, objective, strategy, scenario.grid_index(t));
}

double stationarity_solve_step(const MarketScenario& scenario, const ObjectiveSpec& objective,
                               const FutureState& future, std::size_t index, double prev_value, Scheme scheme) {
  if (index > scenario.grid_n) throw Error(ErrorCode::OffGridTime, "grid index beyond the horizon");
  const double R = rate_integral(scenario, scenario.time(index), scenario.T);
  return solve_step(step_coefficients(scenario, objective, R, index), risk_slope_polynomial(objective),
                    future.variance, prev_value, scheme);
}

double SweepResult::max_residual() const {
  double m = 0.0;
  for (double r : residuals) m = std::max(m, r);
  return m;
}

SweepResult backward_sweep(const MarketScenario& scenario, const ObjectiveSpec& objective, Scheme scheme) {
  const Polynomial slope = risk_slope_polynomial(objective);
  const std::vector<double> R = rate_to_horizon(scenario);
  const std::size_t n = scenario.grid_n;

  SweepResult out;
  out.scheme = scheme;
  out.strategy.times = scenario.times();
  out.strategy.values.assign(n + 1, 0.0);
  out.variance_to_go.assign(n + 1, 0.0);
  out.D.assign(n + 1, 0.0);
  out.residuals.assign(n + 1, 0.0);

  FutureState future;
  double prev = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t i = n + 1; i-- > 0;) {
    const StepCoefficients c = step_coefficients(scenario, objective, R[i], i);
    if (std::isnan(prev)) {
      // Continuity anchor for the first step: the explicit solution at V = 0.
      const double D0 = slope(0.0);
      prev = (D0 != 0.0) ? -c.drift_gain / (2.0 * D0 * c.var_gain) : 0.0;
    }
    double u = 0.0;
    try {
      u = solve_step(c, slope, future.variance, prev, scheme);
    } catch (const Error& e) {
      std::ostringstream msg;
      msg << "step " << i << " (t = " << scenario.time(i) << "): " << e.diagnostics().front();
      throw Error(e.code(), msg.str());
    }
    const double V = future.variance + c.step * c.var_gain * u * u;
    const double D = slope(V);
    out.strategy.values[i] = u;
    out.variance_to_go[i] = V;
    out.D[i] = D;
    out.residuals[i] = std::abs(c.drift_gain + 2.0 * D * c.var_gain * u);
    future.variance = V;
    future.mean += c.step * std::exp(R[i]) * scenario.theta[i] * u;
    prev = u;
  }
  return out;
}

StrategyGrid mv_closed_form(const MarketScenario& scenario, double gamma2) {
  if (!(gamma2 > 0.0)) throw Error(ErrorCode::InvalidArgument, "gamma2 must be positive");
  const std::vector<double> R = rate_to_horizon(scenario);
  StrategyGrid s{scenario.times(), std::vector<double>(scenario.grid_n + 1)};
  for (std::size_t i = 0; i <= scenario.grid_n; ++i) {
    const double sigma = scenario.sigma[i];
    s.values[i] = scenario.theta[i] * std::exp(-R[i]) / (2.0 * gamma2 * sigma * sigma);
  }
  return s;
}

std::vector<double> default_v_grid(const StrategyGrid& strategy) {
  double scale = 0.0;
  for (double u : strategy.values) scale = std::max(scale, std::abs(u));
  if (scale == 0.0) scale = 1.0;
  constexpr int kPerSide = 20;
  const double lo = std::log(1e-6 * scale);
  const double hi = std::log(10.0 * scale);
  std::vector<double> grid;
  grid.reserve(2 * kPerSide + 1);
  for (int j = kPerSide - 1; j >= 0; --j) grid.push_back(-std::exp(lo + (hi - lo) * j / (kPerSide - 1)));
  grid.push_back(0.0);
  for (int j = 0; j < kPerSide; ++j) grid.push_back(std::exp(lo + (hi - lo) * j / (kPerSide - 1)));
  return grid;
}

namespace {

double reference_gamma2(const ObjectiveSpec& objective) {
  const double a = objective.mean_weight();
  const double w2 = objective.linear_weight(2);
  if (w2 == 0.0) throw Error(ErrorCode::UnsupportedObjectiveClass, "objective has no linear q2 weight");
  if (!(a > 0.0)) throw Error(ErrorCode::UnsupportedObjectiveClass, "objective needs a positive m1 weight");
  if (!(w2 < 0.0)) throw Error(ErrorCode::UnsupportedObjectiveClass, "objective needs a negative q2 weight");
  return -w2 / a;
}

}  // namespace

HomogeneityVerdict homogeneity_check_numeric(const MarketScenario& scenario, const ObjectiveSpec& objective,
                                             const std::vector<double>& v_grid, double tolerance) {
  if (v_grid.empty()) throw Error(ErrorCode::EmptyVGrid, "deviation grid is empty");
  HomogeneityVerdict verdict;
  verdict.gamma2 = reference_gamma2(objective);
  const StrategyGrid mv = mv_closed_form(scenario, verdict.gamma2);
  verdict.max_phi = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i <= scenario.grid_n; ++i) {
    const PhiPolynomial phi = phi_polynomial(scenario, objective, mv, i);
    for (double v : v_grid) {
      const double value = phi.poly(v);
      if (value > verdict.max_phi) {
        verdict.max_phi = value;
        verdict.witness = {phi.t, i, v, value};
      }
    }
  }
  verdict.holds = verdict.max_phi <= tolerance;
  return verdict;
}

bool homogeneity_predicate(const ObjectiveSpec& objective) {
  reference_gamma2(objective);
  const Polynomial slope = risk_slope_polynomial(objective);
  const double level = std::max(1.0, std::abs(slope.coeff(0)));
  for (std::size_t j = 1; j < slope.coeffs().size(); ++j)
    if (std::abs(slope.coeffs()[j]) > 1e-12 * level) return false;
  return true;
}

}  // namespace eqmo
