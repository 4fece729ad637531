#pragma once

// Least-squares Monte Carlo solver for BSDEs, recurrence-chained systems and
// flows of BSDEs indexed by their start time.
//
// Backward scheme on the grid t_0 < ... < t_N:
//   Y_N    = xi
//   (Yhat_i, Z_i) = least squares of Y_{i+1} on psi(state_i) and psi(state_i) dW_i,
//                   so that Y_{i+1} ~ Yhat_i + Z_i dW_i
//   Y_i    = Yhat_i + f(t_i, state_i, Yhat_i, Z_i) dt     (explicit in f)
// with optional Picard iterations replacing Yhat_i by the last Y_i inside f.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "eqmo/error.hpp"
#include "eqmo/model.hpp"

namespace eqmo {

/// times x paths, row-major so one time row is contiguous.
using PathMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class FactorKind { none, ou };

/// Risk-premium factor. `ou`: d theta = kappa (theta_bar - theta) dt + eta dB with
/// d<B, W> = rho dt; `none`: theta stays at theta0.
struct FactorModel {
  FactorKind kind = FactorKind::none;
  double kappa = 0.0;
  double theta_bar = 0.0;
  double eta = 0.0;
  double rho = 0.0;
  double theta0 = 0.0;

  void validate() const;
};

/// Simulated Brownian and factor paths shared by every BSDE of a run.
struct PathSet {
  std::vector<double> times;
  PathMatrix W;       ///< (N+1) x P, wealth Brownian motion
  PathMatrix dW;      ///< N x P increments
  PathMatrix factor;  ///< (N+1) x P factor paths; empty for FactorKind::none
  std::optional<PathMatrix> custom_state;
  FactorKind kind = FactorKind::none;
  std::uint64_t seed = 0;

  std::size_t steps() const noexcept { return times.empty() ? 0 : times.size() - 1; }
  std::size_t paths() const noexcept { return static_cast<std::size_t>(W.cols()); }
  double dt(std::size_t i) const { return times[i + 1] - times[i]; }
  /// Regression state: the custom state if set, else the factor (ou) or W (none).
  const PathMatrix& state() const;
  /// Same paths on a grid `factor` times coarser (increments summed).
  PathSet coarsened(std::size_t factor) const;
};

/// Exact OU transition sampling (no Euler bias), jointly Gaussian with dW.
PathSet simulate_factors(const FactorModel& model, double T, std::size_t grid_n, std::size_t paths,
                         std::uint64_t seed, std::size_t workers = 0);

/// Wealth paths X_{i+1} = e^{r_i dt}(X_i + theta_i u_i dt + sigma_i u_i dW_i) from X_0 = x0
/// on the path set's Brownian increments.
PathMatrix simulate_wealth(const MarketScenario& scenario, const StrategyGrid& strategy, const PathSet& paths);

enum class GrowthClass { linear, quadratic_in_z };

struct BsdeGrid;

struct DriverArgs {
  std::size_t step;
  double t;
  std::size_t path;
  double y;
  double z;
  const PathSet& paths;
  std::span<const BsdeGrid* const> deps;  ///< solved predecessors, in depends_on order
};

using Driver = std::function<double(const DriverArgs&)>;
/// Terminal value on `path` for flow member `s` (s = 0 outside flows).
using Terminal = std::function<double(std::size_t path, std::size_t s)>;

struct DriverSpec {
  Driver driver;
  Terminal terminal;
  GrowthClass growth = GrowthClass::linear;
  std::vector<std::size_t> depends_on;
  /// Regress on (state_t, state_s) jointly; for flow members whose terminal
  /// depends on information at their start time s.
  bool anchored_basis = false;
};

struct BsdeOptions {
  int degree = 3;
  double z_bound = 50.0;
  int picard_iterations = 0;
  double saturation_warning = 0.01;
};

struct BsdeGrid {
  std::vector<double> times;
  PathMatrix Y;
  PathMatrix Z;
  int basis_degree = 0;
  bool anchored_basis = false;
  std::size_t start = 0;
  std::size_t paths = 0;
  std::uint64_t seed = 0;
  double y0_mean = 0.0;
  double y0_standard_error = 0.0;
  double z_saturation = 0.0;  ///< fraction of truncated Z values
  bool z_saturated = false;   ///< ZTruncationSaturated telemetry
  double terminal_kurtosis = 0.0;
  std::vector<std::string> warnings;

  double mean_y(std::size_t i) const { return Y.row(static_cast<Eigen::Index>(i)).mean(); }
  double mean_z(std::size_t i) const { return Z.row(static_cast<Eigen::Index>(i)).mean(); }
  double standard_error_y(std::size_t i) const;
};

BsdeGrid solve_bsde(const DriverSpec& spec, const PathSet& paths, const BsdeOptions& options = {},
                    std::size_t start = 0, std::span<const BsdeGrid* const> deps = {});

struct DiagonalProcess {
  std::vector<double> times;
  std::vector<double> y_mean;
  std::vector<double> y_standard_error;
  std::vector<double> z_mean;
  PathMatrix y_paths;  ///< Y^{s}(t_s) per path, row s
  PathMatrix z_paths;  ///< Z^{s}(t_s) per path, row s (zero at the horizon)
};

using FlowFamily = std::function<DriverSpec(std::size_t s)>;

/// Solves member s on [t_s, T] for every grid index s over one shared path set
/// and samples it at its own start time. Members run in parallel.
DiagonalProcess solve_flow_diagonal(const FlowFamily& family, const PathSet& paths, const BsdeOptions& options = {},
                                    std::size_t workers = 0);

/// Solves specs in order, handing each driver the grids listed in depends_on.
std::vector<BsdeGrid> solve_recurrent_system(const std::vector<DriverSpec>& specs, const PathSet& paths,
                                             const BsdeOptions& options = {});

/// First-order adjoint flow of the mean-variance objective J = m1 - gamma2 m2 under a
/// deterministic strategy: member s has driver r(t) y and terminal
/// 1 - 2 gamma2 (X_T - E_s[X_T]). Regresses on wealth anchored at X_s, so
/// `paths.custom_state` must hold the output of simulate_wealth.
FlowFamily mean_variance_adjoint_flow(const MarketScenario& scenario, const StrategyGrid& strategy, double gamma2,
                                      const PathSet& paths);

/// theta(s) Y^{s}(s) + sigma(s) Z^{s}(s), path-averaged: the equilibrium condition
/// read off the diagonal of the adjoint flow, for s = 0..N-1.
std::vector<double> diagonal_equilibrium_residual(const MarketScenario& scenario, const DiagonalProcess& diagonal);

}  // namespace eqmo
