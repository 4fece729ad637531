#include "eqmo/moments.hpp"

#include <algorithm>
#include <cmath>

#include "eqmo/parallel.hpp"

namespace eqmo {

namespace {

void check_order(int n) {
  if (n < 2 || n > kMaxOrder) throw Error(ErrorCode::UnsupportedOrder, "moment order must lie in [2, 8]");
}

// Sample central moments about `mean` for orders 2..n (index k = order k).
std::vector<double> sample_central(std::span<const double> xs, double mean, int n) {
  std::vector<double> acc(static_cast<std::size_t>(n) + 1, 0.0);
  for (double x : xs) {
    const double d = x - mean;
    double p = d;
    for (int k = 2; k <= n; ++k) {
      p *= d;
      acc[static_cast<std::size_t>(k)] += p;
    }
  }
  for (double& a : acc) a /= static_cast<double>(xs.size());
  return acc;
}

// Mean computed as an offset from the first sample, exact when all samples coincide.
double sample_mean(std::span<const double> xs) {
  const double base = xs.front();
  double acc = 0.0;
  for (double x : xs) acc += x - base;
  return base + acc / static_cast<double>(xs.size());
}

}  // namespace

std::vector<double> MomentVector::objective_arguments(MomentMode mode) const {
  std::vector<double> q(static_cast<std::size_t>(kMaxOrder) + 1, 0.0);
  q[1] = m1;
  for (int k = 2; k <= order; ++k)
    q[static_cast<std::size_t>(k)] = mode == MomentMode::central ? central_moment(k) : cumulant_of(k);
  return q;
}

std::vector<double> gaussian_central_moments(double V, int n) {
  if (V < 0.0) throw Error(ErrorCode::NegativeVariance, "variance must be nonnegative");
  check_order(n);
  std::vector<double> out;
  for (int k = 2; k <= n; ++k)
    out.push_back(k % 2 == 0 ? gaussian_moment_factor(k) * std::pow(V, k / 2) : 0.0);
  return out;
}

MomentVector moment_vector_from_central(double m1, std::span<const double> central, int n) {
  MomentVector mv;
  mv.order = n;
  mv.m1 = m1;
  mv.central.assign(static_cast<std::size_t>(n) + 1, 0.0);
  mv.cumulant.assign(static_cast<std::size_t>(n) + 1, 0.0);
  for (int k = 2; k <= n; ++k) mv.central[static_cast<std::size_t>(k)] = central[static_cast<std::size_t>(k)];
  mv.V = mv.central[2];
  const std::vector<double> kappa =
      moments_to_cumulants(std::span<const double>(mv.central).subspan(2, static_cast<std::size_t>(n) - 1));
  for (int k = 2; k <= n; ++k) mv.cumulant[static_cast<std::size_t>(k)] = kappa[static_cast<std::size_t>(k - 2)];
  return mv;
}

MomentVector conditional_moments(const MarketScenario& scenario, const StrategyGrid& strategy, std::size_t index,
                                 double x, int n) {
  check_order(n);
  if (index > scenario.grid_n) throw Error(ErrorCode::OffGridTime, "grid index beyond the horizon");
  validate_strategy(scenario, strategy);
  const std::vector<double> R = rate_to_horizon(scenario);
  const double dt = scenario.dt();
  double drift = 0.0;
  double var = 0.0;
  for (std::size_t i = index; i < scenario.grid_n; ++i) {
    const double growth = std::exp(R[i]);
    const double u = strategy.values[i];
    drift += growth * scenario.theta[i] * u * dt;
    var += growth * growth * scenario.sigma[i] * scenario.sigma[i] * u * u * dt;
  }
  MomentVector mv;
  mv.order = n;
  mv.m1 = x * std::exp(R[index]) + drift;
  mv.V = var;
  mv.central.assign(static_cast<std::size_t>(n) + 1, 0.0);
  mv.cumulant.assign(static_cast<std::size_t>(n) + 1, 0.0);
  const std::vector<double> gauss = gaussian_central_moments(var, n);
  for (int k = 2; k <= n; ++k) mv.central[static_cast<std::size_t>(k)] = gauss[static_cast<std::size_t>(k - 2)];
  mv.cumulant[2] = var;
  return mv;
}

MomentVector conditional_moments(const MarketScenario& scenario, const StrategyGrid& strategy, double t, double x,
                                 int n) {
  return conditional_moments(scenario, strategy, scenario.grid_index(t), x, n);
}

std::vector<double> variance_to_go(const MarketScenario& scenario, const StrategyGrid& strategy) {
  validate_strategy(scenario, strategy);
  const std::vector<double> R = rate_to_horizon(scenario);
  const double dt = scenario.dt();
  std::vector<double> V(scenario.grid_n + 1, 0.0);
  for (std::size_t i = scenario.grid_n; i-- > 0;) {
    const double g2 = std::exp(2.0 * R[i]);
    const double su = scenario.sigma[i] * strategy.values[i];
    V[i] = V[i + 1] + g2 * su * su * dt;
  }
  return V;
}

double objective_value(const ObjectiveSpec& objective, const MomentVector& mv) {
  if (mv.order < objective.max_order)
    throw Error(ErrorCode::OrderMismatch, "moment vector order below the objective's max_order");
  return objective.evaluate(mv.objective_arguments(objective.mode));
}

McEstimate mc_conditional_moments(const MarketScenario& scenario, const StrategyGrid& strategy, double t, double x,
                                  int n, const McOptions& options) {
  check_order(n);
  if (options.paths < 1000) throw Error(ErrorCode::TooFewPaths, "Monte Carlo needs at least 1000 paths");
  const std::size_t batches = std::max<std::size_t>(2, options.batches);
  if (options.paths < batches) throw Error(ErrorCode::TooFewPaths, "fewer paths than batches");
  validate_strategy(scenario, strategy);
  const std::size_t start = scenario.grid_index(t);
  const double dt = scenario.dt();
  const double sqrt_dt = std::sqrt(dt);

  std::vector<double> growth(scenario.grid_n);
  for (std::size_t i = 0; i < scenario.grid_n; ++i) growth[i] = std::exp(scenario.r[i] * dt);

  std::vector<double> terminal(options.paths);
  parallel_for(options.paths, options.workers, [&](std::size_t p) {
    auto rng = path_rng(options.seed, 0x6d63, p);
    std::normal_distribution<double> normal;
    double X = x;
    for (std::size_t i = start; i < scenario.grid_n; ++i) {
      const double u = strategy.values[i];
      const double dW = sqrt_dt * normal(rng);
      X = growth[i] * (X + scenario.theta[i] * u * dt + scenario.sigma[i] * u * dW);
    }
    terminal[p] = X;
  });

  McEstimate est;
  est.paths = options.paths;
  est.seed = options.seed;
  const std::span<const double> all(terminal);
  const double mean = sample_mean(all);
  const std::vector<double> central = sample_central(all, mean, n);
  est.moments = moment_vector_from_central(mean, central, n);

  std::vector<double> batch_mean(batches);
  std::vector<std::vector<double>> batch_central(batches);
  for (std::size_t b = 0; b < batches; ++b) {
    const std::size_t lo = options.paths * b / batches;
    const std::size_t hi = options.paths * (b + 1) / batches;
    const auto chunk = all.subspan(lo, hi - lo);
    batch_mean[b] = sample_mean(chunk);
    batch_central[b] = sample_central(chunk, batch_mean[b], n);
  }
  auto standard_error = [&](auto value_of) {
    const double base = value_of(0);
    double mu = 0.0;
    for (std::size_t b = 0; b < batches; ++b) mu += value_of(b) - base;
    mu /= static_cast<double>(batches);
    double ss = 0.0;
    for (std::size_t b = 0; b < batches; ++b) ss += (value_of(b) - base - mu) * (value_of(b) - base - mu);
    return std::sqrt(ss / static_cast<double>(batches - 1) / static_cast<double>(batches));
  };
  est.m1_standard_error = standard_error([&](std::size_t b) { return batch_mean[b]; });
  est.standard_errors.assign(static_cast<std::size_t>(n) + 1, 0.0);
  for (int k = 2; k <= n; ++k)
    est.standard_errors[static_cast<std::size_t>(k)] =
        standard_error([&](std::size_t b) { return batch_central[b][static_cast<std::size_t>(k)]; });
  return est;
}

}  // namespace eqmo
