#pragma once

// Spike-variation gain polynomial, backward stationarity sweep and the
// homogeneity question against the mean-variance equilibrium.
//
// Perturbing the control by u -> u + v on [t, t + eps) keeps X_T Gaussian; the
// mean moves by eps e^{R} theta v and the variance by eps e^{2R} sigma^2 (2 u v + v^2).
// The eps -> 0 rate of objective gain is therefore the quadratic
//   Phi(t, v) = f_m1 e^{R} theta v + D(t) e^{2R} sigma^2 (2 u v + v^2),
// with D(t) the sensitivity of the objective to the variance through the even
// Gaussian moments (or f_k2 in cumulant mode).

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "eqmo/model.hpp"
#include "eqmo/polynomial.hpp"

namespace eqmo {

enum class Scheme { explicit_scheme, implicit_scheme };

std::string_view to_string(Scheme scheme);

/// Tag recorded in every report: the deviation is added to the current control.
inline constexpr std::string_view kPerturbationConvention = "additive-spike: u + v on [t, t+eps)";

struct PhiPolynomial {
  double t = 0.0;
  std::size_t index = 0;
  Polynomial poly;       ///< in the deviation v; constant term is zero
  double D = 0.0;        ///< variance sensitivity at the current moments
  double D_eff = 0.0;    ///< v^2 coefficient, D e^{2R} sigma^2
  double variance = 0.0; ///< variance-to-go V(t) of the strategy
};

/// D as a polynomial in the variance V for Gaussian terminal laws: the sum over
/// even k of f_{q_k}(Gaussian moments at V) * dq_k/dV. Symbolic; used by the sweep
/// and the homogeneity predicate.
Polynomial risk_slope_polynomial(const ObjectiveSpec& objective);

/// Phi(t, .) from the strategy's conditional moments and the objective's partials.
PhiPolynomial phi_polynomial(const MarketScenario& scenario, const ObjectiveSpec& objective,
                             const StrategyGrid& strategy, double t);
PhiPolynomial phi_polynomial(const MarketScenario& scenario, const ObjectiveSpec& objective,
                             const StrategyGrid& strategy, std::size_t index);

/// Moments-to-go from the steps after t_i, already fixed by the sweep.
struct FutureState {
  double variance = 0.0;
  double mean = 0.0;
};

/// Solves the stationarity condition at grid index `index`:
///   f_m1 e^{R} theta + 2 D e^{2R} sigma^2 u = 0.
/// Explicit: D from the future variance. Implicit: D evaluated at
/// V = V+ + dt e^{2R} sigma^2 u^2, a polynomial equation in u whose admissible
/// roots (D <= 0) are tie-broken by distance to `prev_value`.
double stationarity_solve_step(const MarketScenario& scenario, const ObjectiveSpec& objective,
                               const FutureState& future, std::size_t index, double prev_value, Scheme scheme);

struct SweepResult {
  StrategyGrid strategy;
  std::vector<double> variance_to_go;
  std::vector<double> D;
  std::vector<double> residuals;
  Scheme scheme = Scheme::explicit_scheme;

  double max_residual() const;
};

SweepResult backward_sweep(const MarketScenario& scenario, const ObjectiveSpec& objective, Scheme scheme);

/// u(t) = theta(t) e^{-R(t)} / (2 gamma2 sigma(t)^2), the equilibrium of J = m1 - gamma2 m2.
StrategyGrid mv_closed_form(const MarketScenario& scenario, double gamma2);

struct PhiWitness {
  double t = 0.0;
  std::size_t index = 0;
  double v = 0.0;
  double phi = 0.0;
};

struct HomogeneityVerdict {
  bool holds = true;
  double max_phi = 0.0;
  PhiWitness witness;
  double gamma2 = 0.0;  ///< risk aversion of the mean-variance reference
};

/// Symmetric log-spaced deviations in [-10 s, 10 s] (20 per side, from 1e-6 s) plus 0,
/// with s = max |u| (or 1 for the zero strategy).
std::vector<double> default_v_grid(const StrategyGrid& strategy);

/// Installs the mean-variance equilibrium for the objective's own m1/q2 weights
/// and scans Phi under the full objective over every grid time and v.
HomogeneityVerdict homogeneity_check_numeric(const MarketScenario& scenario, const ObjectiveSpec& objective,
                                             const std::vector<double>& v_grid, double tolerance);

/// True iff the mean-variance equilibrium is an equilibrium for the full
/// objective: the Gaussian risk slope D(V) must not depend on V. Objectives
/// without a positive mean weight and a negative linear q2 weight are outside
/// the class and raise UnsupportedObjectiveClass.
bool homogeneity_predicate(const ObjectiveSpec& objective);

}  // namespace eqmo
