#include "eqmo/bsde.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "eqmo/moments.hpp"
#include "eqmo/parallel.hpp"

namespace eqmo {

void FactorModel::validate() const {
  if (!(eta >= 0.0)) throw Error(ErrorCode::InvalidArgument, "factor volatility eta must be nonnegative");
  if (!(std::abs(rho) <= 1.0)) throw Error(ErrorCode::InvalidArgument, "factor correlation rho must lie in [-1, 1]");
}

const PathMatrix& PathSet::state() const {
  if (custom_state) return *custom_state;
  return kind == FactorKind::ou ? factor : W;
}

PathSet PathSet::coarsened(std::size_t factor_step) const {
  if (factor_step == 0 || steps() % factor_step != 0)
    throw Error(ErrorCode::InvalidArgument, "coarsening factor must divide the number of steps");
  const std::size_t n = steps() / factor_step;
  PathSet out;
  out.kind = kind;
  out.seed = seed;
  out.times.resize(n + 1);
  for (std::size_t i = 0; i <= n; ++i) out.times[i] = times[i * factor_step];
  auto take_rows = [&](const PathMatrix& m) {
    PathMatrix r(static_cast<Eigen::Index>(n + 1), m.cols());
    for (std::size_t i = 0; i <= n; ++i)
      r.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(i * factor_step));
    return r;
  };
  out.W = take_rows(W);
  if (factor.size() > 0) out.factor = take_rows(factor);
  if (custom_state) out.custom_state = take_rows(*custom_state);
  out.dW.resize(static_cast<Eigen::Index>(n), W.cols());
  for (std::size_t i = 0; i < n; ++i) {
    auto row = out.dW.row(static_cast<Eigen::Index>(i));
    row.setZero();
    for (std::size_t j = 0; j < factor_step; ++j) row += dW.row(static_cast<Eigen::Index>(i * factor_step + j));
  }
  return out;
}

PathSet simulate_factors(const FactorModel& model, double T, std::size_t grid_n, std::size_t paths,
                         std::uint64_t seed, std::size_t workers) {
  model.validate();
  if (paths < 1) throw Error(ErrorCode::TooFewPaths, "need at least one path");
  if (!(T > 0.0) || grid_n < 1) throw Error(ErrorCode::GridMismatch, "need T > 0 and grid_n >= 1");
  PathSet ps;
  ps.kind = model.kind;
  ps.seed = seed;
  ps.times.resize(grid_n + 1);
  const double dt = T / static_cast<double>(grid_n);
  for (std::size_t i = 0; i <= grid_n; ++i) ps.times[i] = static_cast<double>(i) * dt;
  const auto rows = static_cast<Eigen::Index>(grid_n + 1);
  const auto cols = static_cast<Eigen::Index>(paths);
  ps.W.resize(rows, cols);
  ps.dW.resize(rows - 1, cols);
  const bool ou = model.kind == FactorKind::ou;
  if (ou) ps.factor.resize(rows, cols);

  // Joint law of (dW, OU innovation) over one step.
  const double sqrt_dt = std::sqrt(dt);
  double decay = 1.0, innovation_var = model.eta * model.eta * dt, covariance = model.eta * model.rho * dt;
  if (std::abs(model.kappa) > 1e-12) {
    decay = std::exp(-model.kappa * dt);
    innovation_var = model.eta * model.eta * (1.0 - decay * decay) / (2.0 * model.kappa);
    covariance = model.eta * model.rho * (1.0 - decay) / model.kappa;
  }
  const double loading_w = covariance / sqrt_dt;
  const double loading_b = std::sqrt(std::max(0.0, innovation_var - loading_w * loading_w));

  parallel_for(paths, workers, [&](std::size_t p) {
    auto rng = path_rng(seed, 0x6673, p);
    std::normal_distribution<double> normal;
    const auto c = static_cast<Eigen::Index>(p);
    double w = 0.0;
    double theta = model.theta0;
    ps.W(0, c) = 0.0;
    if (ou) ps.factor(0, c) = theta;
    for (Eigen::Index i = 0; i + 1 < rows; ++i) {
      const double z1 = normal(rng);
      const double z2 = normal(rng);
      const double dw = sqrt_dt * z1;
      ps.dW(i, c) = dw;
      w += dw;
      ps.W(i + 1, c) = w;
      if (ou) {
        theta = model.theta_bar + (theta - model.theta_bar) * decay + loading_w * z1 + loading_b * z2;
        ps.factor(i + 1, c) = theta;
      }
    }
  });
  return ps;
}

PathMatrix simulate_wealth(const MarketScenario& scenario, const StrategyGrid& strategy, const PathSet& paths) {
  validate_strategy(scenario, strategy);
  if (paths.steps() != scenario.grid_n) throw Error(ErrorCode::GridMismatch, "path grid differs from the scenario");
  const double dt = scenario.dt();
  PathMatrix X(paths.W.rows(), paths.W.cols());
  X.row(0).setConstant(scenario.x0);
  for (std::size_t i = 0; i < scenario.grid_n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    const double growth = std::exp(scenario.r[i] * dt);
    const double u = strategy.values[i];
    X.row(r + 1) = growth * (X.row(r).array() + scenario.theta[i] * u * dt +
                             scenario.sigma[i] * u * paths.dW.row(r).array());
  }
  return X;
}

double BsdeGrid::standard_error_y(std::size_t i) const {
  const auto row = Y.row(static_cast<Eigen::Index>(i));
  const double n = static_cast<double>(row.size());
  if (n < 2) return 0.0;
  const double mean = row.mean();
  return std::sqrt((row.array() - mean).square().sum() / (n - 1.0) / n);
}

namespace {

// Joint least squares of Y_{i+1} on (psi, psi dW / sqrt(dt)), with psi the
// total-degree polynomials in one or two standardised regressors. The first
// block gives E[Y_{i+1} | state], the second Z. Regressors constant across
// paths are dropped.
class Regression {
 public:
  struct Fit {
    Eigen::VectorXd y;
    Eigen::VectorXd z;
  };

  Regression(std::span<const double> x, std::span<const double> anchor, int degree, const Eigen::VectorXd& dw,
             double dt)
      : scale_(std::sqrt(dt)) {
    std::vector<Eigen::ArrayXd> vars;
    auto add = [&](std::span<const double> v) {
      if (v.empty()) return;
      const Eigen::Map<const Eigen::ArrayXd> a(v.data(), static_cast<Eigen::Index>(v.size()));
      const double mean = a.mean();
      const double sd = std::sqrt((a - mean).square().mean());
      if (!(sd > 1e-12 * (1.0 + std::abs(mean)))) return;
      vars.emplace_back((a - mean) / sd);
    };
    add(x);
    add(anchor);
    const auto n = static_cast<Eigen::Index>(x.size());
    std::vector<std::pair<int, int>> powers;
    for (int total = 0; total <= degree; ++total)
      for (int a = total; a >= 0; --a) {
        const int b = total - a;
        if (vars.size() < 1 && a > 0) continue;
        if (vars.size() < 2 && b > 0) continue;
        powers.emplace_back(a, b);
      }
    const auto k = static_cast<Eigen::Index>(powers.size());
    basis_.resize(n, 2 * k);
    const Eigen::ArrayXd xi = dw.array() / scale_;
    for (Eigen::Index c = 0; c < k; ++c) {
      Eigen::ArrayXd col = Eigen::ArrayXd::Ones(n);
      for (int e = 0; e < powers[static_cast<std::size_t>(c)].first; ++e) col *= vars[0];
      for (int e = 0; e < powers[static_cast<std::size_t>(c)].second; ++e) col *= vars[1];
      basis_.col(c) = col.matrix();
      basis_.col(k + c) = (col * xi).matrix();
    }
    const Eigen::MatrixXd gram = basis_.transpose() * basis_ / static_cast<double>(n);
    qr_.compute(gram);
    qr_.setThreshold(1e-10);
    if (qr_.rank() < gram.cols()) {
      std::ostringstream msg;
      msg << "basis Gram matrix has rank " << qr_.rank() << " < " << gram.cols();
      throw Error(ErrorCode::RegressionSingular, msg.str());
    }
  }

  Fit fit(const Eigen::VectorXd& target) const {
    const Eigen::Index n = target.size();
    // Constants lie in the span; return them without round-off.
    if (n > 0 && (target.array() == target[0]).all())
      return {Eigen::VectorXd::Constant(n, target[0]), Eigen::VectorXd::Zero(n)};
    const Eigen::Index k = basis_.cols() / 2;
    const Eigen::VectorXd coef = qr_.solve(basis_.transpose() * target / static_cast<double>(n));
    return {basis_.leftCols(k) * coef.head(k), basis_.leftCols(k) * coef.tail(k) / scale_};
  }

 private:
  double scale_;
  Eigen::MatrixXd basis_;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr_;
};

double sample_kurtosis(const Eigen::Ref<const Eigen::RowVectorXd>& xs) {
  const double mean = xs.mean();
  const double m2 = (xs.array() - mean).square().mean();
  if (!(m2 > 0.0)) return 0.0;
  const double m4 = (xs.array() - mean).square().square().mean();
  return m4 / (m2 * m2);
}

}  // namespace

BsdeGrid solve_bsde(const DriverSpec& spec, const PathSet& paths, const BsdeOptions& options, std::size_t start,
                    std::span<const BsdeGrid* const> deps) {
  if (options.degree < 1) throw Error(ErrorCode::InvalidArgument, "basis degree must be at least 1");
  if (!spec.terminal) throw Error(ErrorCode::InvalidArgument, "driver spec has no terminal");
  const std::size_t N = paths.steps();
  const std::size_t P = paths.paths();
  if (start > N) throw Error(ErrorCode::OutOfRange, "start index beyond the horizon");
  const PathMatrix& state = paths.state();

  BsdeGrid grid;
  grid.times = paths.times;
  grid.basis_degree = options.degree;
  grid.anchored_basis = spec.anchored_basis;
  grid.start = start;
  grid.paths = P;
  grid.seed = paths.seed;
  grid.Y = PathMatrix::Zero(static_cast<Eigen::Index>(N + 1), static_cast<Eigen::Index>(P));
  grid.Z = PathMatrix::Zero(static_cast<Eigen::Index>(N + 1), static_cast<Eigen::Index>(P));

  const auto last = static_cast<Eigen::Index>(N);
  for (std::size_t p = 0; p < P; ++p) grid.Y(last, static_cast<Eigen::Index>(p)) = spec.terminal(p, start);
  grid.terminal_kurtosis = sample_kurtosis(grid.Y.row(last));
  if (!grid.Y.row(last).allFinite()) throw Error(ErrorCode::InvalidArgument, "terminal value is not finite");

  const bool quadratic = spec.growth == GrowthClass::quadratic_in_z;
  std::size_t truncated = 0;
  std::size_t z_count = 0;
  const std::span<const double> anchor_row =
      spec.anchored_basis ? std::span<const double>(state.row(static_cast<Eigen::Index>(start)).data(), P)
                          : std::span<const double>{};

  for (std::size_t i = N; i-- > start;) {
    const auto r = static_cast<Eigen::Index>(i);
    const double dt = paths.dt(i);
    const std::span<const double> x(state.row(r).data(), P);
    const Eigen::VectorXd dw = paths.dW.row(r).transpose();
    const Regression regression(x, i == start ? std::span<const double>{} : anchor_row, options.degree, dw, dt);

    auto [yhat, z] = regression.fit(grid.Y.row(r + 1).transpose());
    if (quadratic) {
      for (Eigen::Index p = 0; p < z.size(); ++p) {
        if (std::abs(z[p]) > options.z_bound) {
          z[p] = std::copysign(options.z_bound, z[p]);
          ++truncated;
        }
      }
      z_count += P;
    }
    for (std::size_t p = 0; p < P; ++p) {
      const auto c = static_cast<Eigen::Index>(p);
      double y = yhat[c];
      for (int it = 0; it <= options.picard_iterations; ++it) {
        const DriverArgs args{i, paths.times[i], p, y, z[c], paths, deps};
        y = yhat[c] + spec.driver(args) * dt;
      }
      grid.Y(r, c) = y;
      grid.Z(r, c) = z[c];
    }
    if (!grid.Y.row(r).allFinite() || !grid.Z.row(r).allFinite()) {
      std::ostringstream msg;
      msg << "non-finite solution at step " << i;
      throw Error(ErrorCode::InvalidArgument, msg.str());
    }
  }

  grid.y0_mean = grid.mean_y(start);
  grid.y0_standard_error = grid.standard_error_y(start);
  if (z_count > 0) {
    grid.z_saturation = static_cast<double>(truncated) / static_cast<double>(z_count);
    if (grid.z_saturation > options.saturation_warning) {
      grid.z_saturated = true;
      std::ostringstream msg;
      msg << "ZTruncationSaturated: " << 100.0 * grid.z_saturation << "% of Z values hit the bound "
          << options.z_bound;
      grid.warnings.push_back(msg.str());
    }
  }
  return grid;
}

DiagonalProcess solve_flow_diagonal(const FlowFamily& family, const PathSet& paths, const BsdeOptions& options,
                                    std::size_t workers) {
  const std::size_t N = paths.steps();
  const auto P = static_cast<Eigen::Index>(paths.paths());
  DiagonalProcess diag;
  diag.times = paths.times;
  diag.y_mean.assign(N + 1, 0.0);
  diag.y_standard_error.assign(N + 1, 0.0);
  diag.z_mean.assign(N + 1, 0.0);
  diag.y_paths = PathMatrix::Zero(static_cast<Eigen::Index>(N + 1), P);
  diag.z_paths = PathMatrix::Zero(static_cast<Eigen::Index>(N + 1), P);

  parallel_for(N + 1, workers, [&](std::size_t s) {
    try {
      const BsdeGrid member = solve_bsde(family(s), paths, options, s);
      const auto r = static_cast<Eigen::Index>(s);
      diag.y_paths.row(r) = member.Y.row(r);
      diag.z_paths.row(r) = member.Z.row(r);
      diag.y_mean[s] = member.mean_y(s);
      diag.y_standard_error[s] = member.standard_error_y(s);
      diag.z_mean[s] = member.mean_z(s);
    } catch (const Error& e) {
      std::ostringstream msg;
      msg << "flow member s = " << s << ": " << e.diagnostics().front();
      throw Error(e.code(), msg.str());
    }
  });
  return diag;
}

std::vector<BsdeGrid> solve_recurrent_system(const std::vector<DriverSpec>& specs, const PathSet& paths,
                                             const BsdeOptions& options) {
  for (std::size_t k = 0; k < specs.size(); ++k)
    for (std::size_t dep : specs[k].depends_on)
      if (dep >= k) {
        std::ostringstream msg;
        msg << "BSDE " << k << " depends on " << dep << ", which is not an earlier system member";
        throw Error(ErrorCode::CyclicDependency, msg.str());
      }
  std::vector<BsdeGrid> solved;
  solved.reserve(specs.size());
  for (std::size_t k = 0; k < specs.size(); ++k) {
    std::vector<const BsdeGrid*> deps;
    for (std::size_t dep : specs[k].depends_on) deps.push_back(&solved[dep]);
    solved.push_back(solve_bsde(specs[k], paths, options, 0, deps));
  }
  return solved;
}

FlowFamily mean_variance_adjoint_flow(const MarketScenario& scenario, const StrategyGrid& strategy, double gamma2,
                                      const PathSet& paths) {
  if (!paths.custom_state) throw Error(ErrorCode::InvalidArgument, "adjoint flow regresses on simulated wealth");
  if (paths.steps() != scenario.grid_n) throw Error(ErrorCode::GridMismatch, "path grid differs from the scenario");
  const std::size_t N = scenario.grid_n;
  // E_s[X_T] = X_s e^{R(s)} + drift(s).
  std::vector<double> growth(N + 1), drift(N + 1);
  for (std::size_t s = 0; s <= N; ++s) {
    const MomentVector mv = conditional_moments(scenario, strategy, s, 0.0, 2);
    drift[s] = mv.m1;
    growth[s] = std::exp(rate_integral(scenario, scenario.time(s), scenario.T));
  }
  const PathMatrix* wealth = &*paths.custom_state;
  const std::vector<double> rates = scenario.r;
  return [=](std::size_t) {
    DriverSpec spec;
    spec.anchored_basis = true;
    spec.driver = [rates](const DriverArgs& a) { return rates[a.step] * a.y; };
    spec.terminal = [=](std::size_t p, std::size_t member) {
      const auto c = static_cast<Eigen::Index>(p);
      const double x_T = (*wealth)(static_cast<Eigen::Index>(N), c);
      const double x_s = (*wealth)(static_cast<Eigen::Index>(member), c);
      return 1.0 - 2.0 * gamma2 * (x_T - (x_s * growth[member] + drift[member]));
    };
    return spec;
  };
}

std::vector<double> diagonal_equilibrium_residual(const MarketScenario& scenario, const DiagonalProcess& diagonal) {
  // Z is undefined at the horizon, so the condition is read on [t_0, t_{N-1}].
  std::vector<double> out(diagonal.times.size() - 1);
  for (std::size_t s = 0; s < out.size(); ++s)
    out[s] = scenario.theta[s] * diagonal.y_mean[s] + scenario.sigma[s] * diagonal.z_mean[s];
  return out;
}

}  // namespace eqmo
