#include "eqmo/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace eqmo {

MarketScenario MarketScenario::constant(double r, double theta, double sigma, double T, double x0,
                                        std::size_t grid_n) {
  MarketScenario s;
  s.r.assign(grid_n + 1, r);
  s.theta.assign(grid_n + 1, theta);
  s.sigma.assign(grid_n + 1, sigma);
  s.T = T;
  s.x0 = x0;
  s.grid_n = grid_n;
  return s;
}

std::vector<double> MarketScenario::times() const {
  std::vector<double> t(grid_n + 1);
  for (std::size_t i = 0; i <= grid_n; ++i) t[i] = time(i);
  return t;
}

std::size_t MarketScenario::grid_index(double t) const {
  const double pos = t / dt();
  const double nearest = std::round(pos);
  if (!(nearest >= 0.0 && nearest <= static_cast<double>(grid_n)) ||
      std::abs(pos - nearest) > 1e-9 * std::max(1.0, nearest)) {
    std::ostringstream msg;
    msg << "time " << t << " is not a grid point of [0, " << T << "] with " << grid_n << " steps";
    throw Error(ErrorCode::OffGridTime, msg.str());
  }
  return static_cast<std::size_t>(nearest);
}

int ObjectiveTerm::total_degree() const {
  int d = 0;
  for (int e : exponents) d += e;
  return d;
}

ObjectiveSpec ObjectiveSpec::linear(MomentMode mode, std::span<const double> weights) {
  ObjectiveSpec spec;
  spec.mode = mode;
  spec.add_term({{1, 1}}, 1.0);
  int top = 2;
  for (std::size_t k = 2; k < weights.size(); ++k) {
    if (weights[k] == 0.0) continue;
    spec.add_term({{static_cast<int>(k), 1}}, weights[k]);
    top = std::max(top, static_cast<int>(k));
  }
  spec.max_order = top;
  return spec;
}

ObjectiveSpec ObjectiveSpec::mean_variance(double gamma2) {
  ObjectiveSpec spec;
  spec.max_order = 2;
  spec.add_term({{1, 1}}, 1.0);
  spec.add_term({{2, 1}}, -gamma2);
  return spec;
}

ObjectiveSpec& ObjectiveSpec::add_term(std::initializer_list<std::pair<int, int>> factors, double coeff) {
  ObjectiveTerm term;
  term.coeff = coeff;
  for (auto [k, e] : factors) {
    if (k < 1 || k > kMaxOrder) throw Error(ErrorCode::UnsupportedOrder, "moment index out of [1, 8]");
    term.exponents[static_cast<std::size_t>(k)] += e;
    if (k > max_order) max_order = k;
  }
  terms.push_back(term);
  return *this;
}

double ObjectiveSpec::evaluate(std::span<const double> q) const {
  double total = 0.0;
  for (const auto& term : terms) {
    double v = term.coeff;
    for (int k = 1; k <= kMaxOrder; ++k)
      if (term.involves(k)) v *= std::pow(q[static_cast<std::size_t>(k)], term.exponent(k));
    total += v;
  }
  return total;
}

double ObjectiveSpec::partial(int k, std::span<const double> q) const {
  double total = 0.0;
  for (const auto& term : terms) {
    const int e = term.exponent(k);
    if (e == 0) continue;
    double v = term.coeff * e;
    for (int j = 1; j <= kMaxOrder; ++j) {
      const int p = term.exponent(j) - (j == k ? 1 : 0);
      if (p > 0) v *= std::pow(q[static_cast<std::size_t>(j)], p);
    }
    total += v;
  }
  return total;
}

double ObjectiveSpec::linear_weight(int k) const {
  double w = 0.0;
  for (const auto& term : terms)
    if (term.exponent(k) == 1 && term.total_degree() == 1) w += term.coeff;
  return w;
}

double ObjectiveSpec::mean_weight() const { return linear_weight(1); }

StrategyGrid StrategyGrid::scaled(double factor) const {
  StrategyGrid out = *this;
  for (double& v : out.values) v *= factor;
  return out;
}

StrategyGrid constant_strategy(const MarketScenario& scenario, double value) {
  return StrategyGrid{scenario.times(), std::vector<double>(scenario.grid_n + 1, value)};
}

ValidatedScenario validate_scenario(const MarketScenario& scenario, const ObjectiveSpec& objective) {
  std::vector<std::pair<ErrorCode, std::string>> issues;
  auto report = [&](ErrorCode code, std::string msg) { issues.emplace_back(code, std::move(msg)); };

  if (!(scenario.T > 0.0) || !std::isfinite(scenario.T)) report(ErrorCode::GridMismatch, "horizon T must be positive");
  if (scenario.grid_n < 1) report(ErrorCode::GridMismatch, "grid_n must be at least 1");
  if (!std::isfinite(scenario.x0)) report(ErrorCode::GridMismatch, "x0 must be finite");
  const std::size_t expected = scenario.grid_n + 1;
  const std::pair<const char*, const std::vector<double>*> arrays[] = {
      {"r", &scenario.r}, {"theta", &scenario.theta}, {"sigma", &scenario.sigma}};
  bool shapes_ok = true;
  for (auto [name, values] : arrays) {
    if (values->size() != expected) {
      shapes_ok = false;
      std::ostringstream msg;
      msg << name << " has " << values->size() << " values, grid needs " << expected;
      report(ErrorCode::GridMismatch, msg.str());
    } else if (!std::all_of(values->begin(), values->end(), [](double v) { return std::isfinite(v); })) {
      report(ErrorCode::GridMismatch, std::string(name) + " contains non-finite values");
    }
  }
  const double sigma_min = scenario.sigma_min > 0.0 ? scenario.sigma_min : 1e-8;
  if (shapes_ok) {
    for (std::size_t i = 0; i < expected; ++i) {
      if (!(scenario.sigma[i] >= sigma_min)) {
        std::ostringstream msg;
        msg << "sigma(t_" << i << ") = " << scenario.sigma[i] << " below sigma_min " << sigma_min;
        report(ErrorCode::SigmaTooSmall, msg.str());
        break;
      }
    }
  }

  if (objective.max_order < 2 || objective.max_order > kMaxOrder)
    report(ErrorCode::UnsupportedOrder, "max_order must lie in [2, 8]");
  bool has_risk_term = false;
  for (const auto& term : objective.terms) {
    if (!std::isfinite(term.coeff)) report(ErrorCode::InvalidArgument, "objective coefficient is not finite");
    for (int k = 2; k <= kMaxOrder; ++k)
      if (term.involves(k) && k > objective.max_order)
        report(ErrorCode::UnsupportedOrder, "term uses order " + std::to_string(k) + " above max_order");
    const int mean_degree = term.exponent(1);
    if (mean_degree > 1) {
      report(ErrorCode::NonAffineMeanTerm,
             "objective degree in m1 exceeds 1: state-dependent equilibrium unsupported");
    } else if (mean_degree == 1 && term.total_degree() > 1) {
      report(ErrorCode::NonAffineMeanTerm,
             "m1 multiplies a higher moment: state-dependent equilibrium unsupported");
    }
    if (term.involves(2) && term.coeff != 0.0) has_risk_term = true;
  }
  if (!has_risk_term) report(ErrorCode::EmptyRiskTerm, "objective has no nonzero term in the order-2 moment");

  if (!issues.empty()) {
    std::vector<std::string> diagnostics;
    for (auto& [code, msg] : issues) diagnostics.push_back(std::string(to_string(code)) + ": " + msg);
    throw Error(issues.front().first, issues.front().second, std::move(diagnostics));
  }

  ValidatedScenario out{scenario, objective};
  out.scenario.sigma_min = sigma_min;
  return out;
}

void validate_strategy(const MarketScenario& scenario, const StrategyGrid& strategy) {
  if (strategy.values.size() != scenario.grid_n + 1)
    throw Error(ErrorCode::GridMismatch, "strategy length does not match the scenario grid");
  for (double v : strategy.values)
    if (!std::isfinite(v)) throw Error(ErrorCode::InvalidArgument, "strategy contains non-finite values");
}

double rate_integral(const MarketScenario& scenario, double t1, double t2) {
  const double eps = 1e-12 * scenario.T;
  if (!(t1 >= -eps && t1 <= t2 + eps && t2 <= scenario.T + eps))
    throw Error(ErrorCode::OutOfRange, "rate_integral needs 0 <= t1 <= t2 <= T");
  if (t2 <= t1) return 0.0;
  const double dt = scenario.dt();
  double total = 0.0;
  auto cell = [&](double t) {
    const auto i = static_cast<std::size_t>(std::floor(t / dt));
    return std::min(i, scenario.grid_n - 1);
  };
  const std::size_t first = cell(t1);
  const std::size_t last = cell(std::max(t1, t2 - eps));
  for (std::size_t i = first; i <= last; ++i) {
    const double lo = std::max(t1, scenario.time(i));
    const double hi = std::min(t2, i + 1 == scenario.grid_n ? scenario.T : scenario.time(i + 1));
    if (hi > lo) total += scenario.r[i] * (hi - lo);
  }
  return total;
}

std::vector<double> rate_to_horizon(const MarketScenario& scenario) {
  std::vector<double> R(scenario.grid_n + 1, 0.0);
  const double dt = scenario.dt();
  for (std::size_t i = scenario.grid_n; i-- > 0;) R[i] = R[i + 1] + scenario.r[i] * dt;
  return R;
}

namespace {

double binomial(int n, int k) {
  double b = 1.0;
  for (int j = 1; j <= k; ++j) b = b * (n - k + j) / j;
  return b;
}

// Zero-mean moment/cumulant recursion m_n = sum_{j=1}^{n} C(n-1, j-1) kappa_j m_{n-j}
// with m_0 = 1 and kappa_1 = m_1 = 0.
void check_order(std::size_t len) {
  if (len + 1 > static_cast<std::size_t>(kMaxOrder))
    throw Error(ErrorCode::UnsupportedOrder, "moment order above 8 is not supported");
}

}  // namespace

std::vector<double> moments_to_cumulants(std::span<const double> central) {
  check_order(central.size());
  const int n = static_cast<int>(central.size()) + 1;
  std::vector<double> m(static_cast<std::size_t>(n) + 1, 0.0), kappa(static_cast<std::size_t>(n) + 1, 0.0);
  m[0] = 1.0;
  for (int k = 2; k <= n; ++k) m[static_cast<std::size_t>(k)] = central[static_cast<std::size_t>(k - 2)];
  for (int k = 2; k <= n; ++k) {
    double acc = m[static_cast<std::size_t>(k)];
    for (int j = 2; j < k; ++j)
      acc -= binomial(k - 1, j - 1) * kappa[static_cast<std::size_t>(j)] * m[static_cast<std::size_t>(k - j)];
    kappa[static_cast<std::size_t>(k)] = acc;
  }
  return {kappa.begin() + 2, kappa.end()};
}

std::vector<double> cumulants_to_moments(std::span<const double> cumulants) {
  check_order(cumulants.size());
  const int n = static_cast<int>(cumulants.size()) + 1;
  std::vector<double> m(static_cast<std::size_t>(n) + 1, 0.0), kappa(static_cast<std::size_t>(n) + 1, 0.0);
  m[0] = 1.0;
  for (int k = 2; k <= n; ++k) kappa[static_cast<std::size_t>(k)] = cumulants[static_cast<std::size_t>(k - 2)];
  for (int k = 2; k <= n; ++k) {
    double acc = kappa[static_cast<std::size_t>(k)];
    for (int j = 2; j < k; ++j)
      acc += binomial(k - 1, j - 1) * kappa[static_cast<std::size_t>(j)] * m[static_cast<std::size_t>(k - j)];
    m[static_cast<std::size_t>(k)] = acc;
  }
  return {m.begin() + 2, m.end()};
}

double gaussian_moment_factor(int k) {
  if (k % 2 != 0) return 0.0;
  double f = 1.0;
  for (int j = k - 1; j > 1; j -= 2) f *= j;
  return f;
}

}  // namespace eqmo
