#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "eqmo/equilibrium.hpp"
#include "eqmo/moments.hpp"

using namespace eqmo;

namespace {

MarketScenario market(std::size_t n = 100, double r = 0.0) { return MarketScenario::constant(r, 0.3, 0.2, 1.0, 1.0, n); }

ObjectiveSpec make(MomentMode mode, std::initializer_list<std::pair<std::initializer_list<std::pair<int, int>>, double>> terms) {
  ObjectiveSpec o;
  o.mode = mode;
  for (const auto& [factors, c] : terms) o.add_term(factors, c);
  return o;
}

ObjectiveSpec raw_m4() { return make(MomentMode::central, {{{{1, 1}}, 1.0}, {{{2, 1}}, -1.0}, {{{4, 1}}, -0.5}}); }
ObjectiveSpec cumulant_kurtosis() {
  return make(MomentMode::cumulant, {{{{1, 1}}, 1.0}, {{{2, 1}}, -1.0}, {{{4, 1}}, -0.8}});
}

ErrorCode code_of(const auto& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an eqmo::Error");
  return ErrorCode::InvalidArgument;
}

double sup_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

}  // namespace

TEST_CASE("risk slope polynomials") {
  CHECK(risk_slope_polynomial(ObjectiveSpec::mean_variance(1.0)) == Polynomial{-1.0});
  // m4 = 3 V^2, so -0.5 m4 contributes -3 V.
  CHECK(risk_slope_polynomial(raw_m4()) == Polynomial{-1.0, -3.0});
  CHECK(risk_slope_polynomial(make(MomentMode::central, {{{{1, 1}}, 1.0}, {{{2, 1}}, -1.0}, {{{2, 2}}, -1.0}})) ==
        Polynomial{-1.0, -2.0});
  // Odd moments vanish and do not move D.
  CHECK(risk_slope_polynomial(make(MomentMode::central, {{{{1, 1}}, 1.0}, {{{2, 1}}, -1.0}, {{{3, 1}}, 0.4}})) ==
        Polynomial{-1.0});
  CHECK(risk_slope_polynomial(cumulant_kurtosis()) == Polynomial{-1.0});
  // -m6 = -15 V^3, slope -45 V^2.
  CHECK(risk_slope_polynomial(make(MomentMode::central, {{{{1, 1}}, 1.0}, {{{2, 1}}, -1.0}, {{{6, 1}}, -1.0}})) ==
        Polynomial{-1.0, 0.0, -45.0});
}

TEST_CASE("symbolic slope agrees with the numeric partials inside phi") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const auto m = market(40);
  for (int trial = 0; trial < 40; ++trial) {
    ObjectiveSpec o;
    o.add_term({{1, 1}}, 1.0).add_term({{2, 1}}, -1.0 + 0.5 * u(rng));
    o.add_term({{4, 1}}, 0.5 * u(rng)).add_term({{2, 2}}, 0.5 * u(rng)).add_term({{2, 1}, {4, 1}}, 0.3 * u(rng));
    o.add_term({{6, 1}}, 0.2 * u(rng)).add_term({{3, 2}}, u(rng));
    const auto slope = risk_slope_polynomial(o);
    auto s = constant_strategy(m, 0.0);
    for (double& x : s.values) x = 2.0 + u(rng);
    for (std::size_t i : {std::size_t{0}, std::size_t{17}, std::size_t{39}}) {
      const auto phi = phi_polynomial(m, o, s, i);
      CHECK(phi.D == doctest::Approx(slope(phi.variance)).epsilon(1e-12));
    }
  }
}

TEST_CASE("phi polynomial examples") {
  const auto m = market();
  const auto mv = ObjectiveSpec::mean_variance(1.0);
  const auto at_eq = phi_polynomial(m, mv, constant_strategy(m, 3.75), 0.3);
  REQUIRE(at_eq.poly.degree() == 2);
  CHECK(std::abs(at_eq.poly.coeff(0)) <= 1e-12);
  CHECK(std::abs(at_eq.poly.coeff(1)) <= 1e-12);
  CHECK(at_eq.poly.coeff(2) == doctest::Approx(-0.04).epsilon(1e-13));
  CHECK(at_eq.D_eff == doctest::Approx(-0.04).epsilon(1e-13));

  const auto off = phi_polynomial(m, mv, constant_strategy(m, 4.0), 0.3);
  CHECK(off.poly.coeff(1) == doctest::Approx(-0.02).epsilon(1e-12));
  CHECK(off.poly.coeff(2) == doctest::Approx(-0.04).epsilon(1e-13));

  ObjectiveSpec mean_only;
  mean_only.add_term({{1, 1}}, 1.0).add_term({{2, 1}}, 0.0);
  const auto dm = market(100, 0.05);
  const auto drift = phi_polynomial(dm, mean_only, constant_strategy(dm, 2.0), 0.4);
  CHECK(drift.poly.coeff(1) == doctest::Approx(0.3 * std::exp(0.05 * 0.6)).epsilon(1e-13));
  CHECK(drift.poly.coeff(2) == 0.0);
}

TEST_CASE("phi vanishes at zero deviation") {
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  auto m = market(30);
  for (int trial = 0; trial < 20; ++trial) {
    for (std::size_t i = 0; i <= m.grid_n; ++i) {
      m.r[i] = 0.05 * u(rng);
      m.theta[i] = 0.3 * u(rng);
      m.sigma[i] = 0.25 + 0.1 * u(rng);
    }
    auto s = constant_strategy(m, 0.0);
    for (double& x : s.values) x = 3.0 * u(rng);
    const auto o = trial % 2 ? raw_m4() : cumulant_kurtosis();
    for (std::size_t i = 0; i <= m.grid_n; i += 5) CHECK(phi_polynomial(m, o, s, i).poly(0.0) == 0.0);
  }
}

TEST_CASE("stationarity step") {
  const auto m = market();
  const auto mv = ObjectiveSpec::mean_variance(1.0);
  for (double V : {0.0, 0.3, 7.0}) {
    CHECK(stationarity_solve_step(m, mv, {V, 0.0}, 10, 0.0, Scheme::explicit_scheme) ==
          doctest::Approx(3.75).epsilon(1e-14));
    CHECK(stationarity_solve_step(m, mv, {V, 0.0}, 10, 0.0, Scheme::implicit_scheme) ==
          doctest::Approx(3.75).epsilon(1e-12));
  }
  CHECK(stationarity_solve_step(m, raw_m4(), {0.0, 0.0}, m.grid_n, 3.0, Scheme::implicit_scheme) ==
        doctest::Approx(3.75).epsilon(1e-12));

  ObjectiveSpec odd_only;
  odd_only.add_term({{1, 1}}, 1.0).add_term({{3, 1}}, 0.2);
  CHECK(code_of([&] { stationarity_solve_step(m, odd_only, {0.1, 0.0}, 3, 0.0, Scheme::explicit_scheme); }) ==
        ErrorCode::NoSecondOrderTerm);
  CHECK(code_of([&] { stationarity_solve_step(m, odd_only, {0.1, 0.0}, 3, 0.0, Scheme::implicit_scheme); }) ==
        ErrorCode::NoSecondOrderTerm);

  ObjectiveSpec risk_seeking;
  risk_seeking.add_term({{1, 1}}, 1.0).add_term({{2, 1}}, 1.0);
  CHECK(code_of([&] { stationarity_solve_step(m, risk_seeking, {0.1, 0.0}, 3, 0.0, Scheme::explicit_scheme); }) ==
        ErrorCode::AmbiguousRoot);

  auto flat = m;
  flat.theta[5] = 0.0;
  CHECK(stationarity_solve_step(flat, mv, {0.2, 0.0}, 5, 1.0, Scheme::implicit_scheme) == 0.0);
}

TEST_CASE("mean-variance sweep reproduces the closed form") {
  const auto m = market();
  const auto sweep = backward_sweep(m, ObjectiveSpec::mean_variance(1.0), Scheme::explicit_scheme);
  const auto closed = mv_closed_form(m, 1.0);
  REQUIRE(sweep.strategy.size() == 101);
  for (std::size_t i = 0; i <= 100; ++i) {
    CHECK(sweep.strategy.values[i] == doctest::Approx(3.75).epsilon(1e-14));
    CHECK(std::abs(sweep.strategy.values[i] - closed.values[i]) <= 1e-12);
    CHECK(sweep.D[i] == -1.0);
  }
  CHECK(sweep.max_residual() <= 1e-12);
  CHECK(sweep.variance_to_go[0] == doctest::Approx(0.5625).epsilon(1e-13));
  CHECK(sweep.variance_to_go[100] == 0.0);
}

TEST_CASE("sweep equals closed form with discounting and time-varying parameters") {
  auto m = market(100, 0.05);
  const auto closed = mv_closed_form(m, 1.0);
  for (std::size_t i = 0; i <= 100; ++i)
    CHECK(closed.values[i] == doctest::Approx(3.75 * std::exp(-0.05 * (1.0 - m.time(i)))).epsilon(1e-12));

  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t i = 0; i <= m.grid_n; ++i) {
    m.r[i] = 0.06 * u(rng);
    m.theta[i] = 0.1 + 0.4 * u(rng);
    m.sigma[i] = 0.1 + 0.3 * u(rng);
  }
  const auto sweep = backward_sweep(m, ObjectiveSpec::mean_variance(2.5), Scheme::explicit_scheme);
  CHECK(sup_diff(sweep.strategy.values, mv_closed_form(m, 2.5).values) <= 1e-12);
}

TEST_CASE("mv_closed_form edge cases") {
  auto m = market();
  m.theta.assign(m.theta.size(), 0.0);
  for (double v : mv_closed_form(m, 1.0).values) CHECK(v == 0.0);
  CHECK(code_of([&] { mv_closed_form(m, 0.0); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("cumulant-mode sweep is bitwise equal to mean-variance") {
  const auto m = market();
  for (auto scheme : {Scheme::explicit_scheme, Scheme::implicit_scheme}) {
    const auto a = backward_sweep(m, ObjectiveSpec::mean_variance(1.0), scheme);
    const auto b = backward_sweep(m, cumulant_kurtosis(), scheme);
    CHECK(a.strategy.values == b.strategy.values);
    CHECK(a.variance_to_go == b.variance_to_go);
    CHECK(a.D == b.D);
  }
  std::mt19937_64 rng(29);
  std::normal_distribution<double> z;
  for (int trial = 0; trial < 10; ++trial) {
    ObjectiveSpec o;
    o.mode = MomentMode::cumulant;
    o.add_term({{1, 1}}, 1.0).add_term({{2, 1}}, -1.0);
    for (int k = 3; k <= 8; ++k) o.add_term({{k, 1}}, z(rng));
    CHECK(backward_sweep(m, o, Scheme::explicit_scheme).strategy.values ==
          backward_sweep(m, ObjectiveSpec::mean_variance(1.0), Scheme::explicit_scheme).strategy.values);
  }
}

TEST_CASE("raw fourth moment: implicit sweep against a fixed-point oracle") {
  const auto m = market(200);
  const auto sweep = backward_sweep(m, raw_m4(), Scheme::implicit_scheme);
  // u_i (1 + 3 V_i) = 3.75 with V_i = V_{i+1} + dt 0.04 u_i^2, solved by plain iteration.
  const double dt = m.dt();
  double V_next = 0.0;
  std::vector<double> oracle(201);
  for (std::size_t i = 201; i-- > 0;) {
    const double step = i == 200 ? 0.0 : dt;
    double u = 3.75;
    for (int it = 0; it < 200; ++it) u = 3.75 / (1.0 + 3.0 * (V_next + step * 0.04 * u * u));
    oracle[i] = u;
    V_next += step * 0.04 * u * u;
  }
  CHECK(sweep.strategy.values[200] == doctest::Approx(3.75).epsilon(1e-14));
  CHECK(sup_diff(sweep.strategy.values, oracle) <= 1e-10);
  for (std::size_t i = 0; i <= 200; ++i) {
    CHECK(std::abs(sweep.strategy.values[i] * (1.0 + 3.0 * sweep.variance_to_go[i]) - 3.75) <= 1e-8);
    CHECK(sweep.D[i] <= 0.0);
    if (i < 200) CHECK(sweep.strategy.values[i] < 3.75);
  }
  CHECK(sweep.max_residual() <= 1e-8);
}

TEST_CASE("implicit and explicit schemes converge to each other at first order") {
  std::vector<double> gaps;
  for (std::size_t n : {50u, 100u, 200u, 400u}) {
    const auto m = market(n);
    const auto e = backward_sweep(m, raw_m4(), Scheme::explicit_scheme);
    const auto i = backward_sweep(m, raw_m4(), Scheme::implicit_scheme);
    gaps.push_back(sup_diff(e.strategy.values, i.strategy.values));
  }
  for (std::size_t k = 1; k < gaps.size(); ++k) {
    const double ratio = gaps[k] / gaps[k - 1];
    CHECK(ratio == doctest::Approx(0.5).epsilon(0.1));
  }
}

TEST_CASE("default deviation grid") {
  const auto m = market();
  const auto g = default_v_grid(constant_strategy(m, 3.75));
  CHECK(g.size() == 41);
  CHECK(std::count(g.begin(), g.end(), 0.0) == 1);
  CHECK(*std::max_element(g.begin(), g.end()) == doctest::Approx(37.5));
  CHECK(*std::min_element(g.begin(), g.end()) == doctest::Approx(-37.5));
}

TEST_CASE("homogeneity examples") {
  const auto m = market();
  const auto grid = default_v_grid(mv_closed_form(m, 1.0));

  const auto cum = homogeneity_check_numeric(m, cumulant_kurtosis(), grid, 1e-10);
  CHECK(cum.holds);
  CHECK(homogeneity_predicate(cumulant_kurtosis()));

  const auto mv = homogeneity_check_numeric(m, ObjectiveSpec::mean_variance(1.0), grid, 1e-10);
  CHECK(mv.holds);
  CHECK(std::abs(mv.max_phi) <= 1e-12);
  CHECK(homogeneity_predicate(ObjectiveSpec::mean_variance(1.0)));

  const auto raw = homogeneity_check_numeric(m, raw_m4(), grid, 1e-10);
  CHECK_FALSE(raw.holds);
  CHECK(raw.max_phi > 0.0);
  CHECK(raw.witness.v < 0.0);
  CHECK(raw.witness.t < 1.0);
  CHECK(raw.gamma2 == 1.0);
  CHECK_FALSE(homogeneity_predicate(raw_m4()));

  // v-coefficient of Phi at the MV strategy under the raw objective is -0.9 V(t).
  const auto mv_strategy = mv_closed_form(m, 1.0);
  const auto phi = phi_polynomial(m, raw_m4(), mv_strategy, std::size_t{0});
  CHECK(phi.poly.coeff(1) == doctest::Approx(-0.9 * 0.5625).epsilon(1e-12));

  CHECK(code_of([&] { homogeneity_check_numeric(m, raw_m4(), {}, 1e-10); }) == ErrorCode::EmptyVGrid);
}

TEST_CASE("homogeneity predicate matches the numeric verdict on the corpus") {
  std::vector<ObjectiveSpec> corpus = {
      ObjectiveSpec::mean_variance(1.0),
      ObjectiveSpec::mean_variance(0.4),
      cumulant_kurtosis(),
      raw_m4(),
      make(MomentMode::central, {{{{1, 1}}, 1.0}, {{{2, 1}}, -1.0}, {{{3, 1}}, 0.5}}),
      make(MomentMode::central, {{{{1, 1}}, 1.0}, {{{2, 1}}, -1.0}, {{{2, 2}}, -0.3}}),
      make(MomentMode::central, {{{{1, 1}}, 1.0}, {{{2, 1}}, -1.0}, {{{6, 1}}, -0.05}}),
      make(MomentMode::central, {{{{1, 1}}, 1.0}, {{{2, 1}}, -1.0}, {{{3, 1}}, 0.3}, {{{4, 1}}, -0.2}}),
      make(MomentMode::cumulant, {{{{1, 1}}, 1.0}, {{{2, 1}}, -1.0}, {{{3, 1}}, 0.7}, {{{6, 1}}, -0.2}}),
      make(MomentMode::cumulant, {{{{1, 1}}, 1.0}, {{{2, 1}}, -1.0}, {{{2, 2}}, -0.2}}),
      make(MomentMode::cumulant, {{{{1, 1}}, 2.0}, {{{2, 1}}, -1.0}, {{{4, 1}}, -0.8}, {{{3, 2}}, -0.1}}),
      // Weights that cancel: -0.5 m4 + 1.5 m2^2 has zero Gaussian slope beyond the constant.
      make(MomentMode::central, {{{{1, 1}}, 1.0}, {{{2, 1}}, -1.0}, {{{4, 1}}, -0.5}, {{{2, 2}}, 1.5}}),
  };
  for (const auto& market_case : {market(), market(60, 0.05)}) {
    for (std::size_t k = 0; k < corpus.size(); ++k) {
      INFO("objective " << k);
      const auto grid = default_v_grid(mv_closed_form(market_case, -corpus[k].linear_weight(2) / corpus[k].mean_weight()));
      const auto verdict = homogeneity_check_numeric(market_case, corpus[k], grid, 1e-10);
      CHECK(verdict.holds == homogeneity_predicate(corpus[k]));
    }
  }
}

TEST_CASE("homogeneity rejects objectives outside the class") {
  const auto m = market();
  ObjectiveSpec no_linear_q2;
  no_linear_q2.add_term({{1, 1}}, 1.0).add_term({{2, 2}}, -1.0);
  CHECK(code_of([&] { homogeneity_predicate(no_linear_q2); }) == ErrorCode::UnsupportedObjectiveClass);
  ObjectiveSpec risk_seeking;
  risk_seeking.add_term({{1, 1}}, 1.0).add_term({{2, 1}}, 1.0);
  CHECK(code_of([&] { homogeneity_predicate(risk_seeking); }) == ErrorCode::UnsupportedObjectiveClass);
  ObjectiveSpec negative_mean;
  negative_mean.add_term({{1, 1}}, -1.0).add_term({{2, 1}}, -1.0);
  CHECK(code_of([&] { homogeneity_check_numeric(m, negative_mean, {0.0, 1.0}, 1e-10); }) ==
        ErrorCode::UnsupportedObjectiveClass);
}
