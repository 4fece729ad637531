#include <doctest.h>

#include <cmath>
#include <random>

#include "eqmo/moments.hpp"

using namespace eqmo;

namespace {

MarketScenario market(std::size_t n = 100) { return MarketScenario::constant(0.0, 0.3, 0.2, 1.0, 1.0, n); }

ErrorCode code_of(const auto& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an eqmo::Error");
  return ErrorCode::InvalidArgument;
}

// Direct left-endpoint sums for the conditional mean and variance.
std::pair<double, double> mean_variance_by_sums(const MarketScenario& m, const StrategyGrid& u, std::size_t from,
                                                double x) {
  const double dt = m.dt();
  auto R = [&](std::size_t i) {
    double s = 0.0;
    for (std::size_t j = i; j < m.grid_n; ++j) s += m.r[j] * dt;
    return s;
  };
  double mean = x * std::exp(R(from)), var = 0.0;
  for (std::size_t i = from; i < m.grid_n; ++i) {
    mean += std::exp(R(i)) * m.theta[i] * u.values[i] * dt;
    var += std::exp(2 * R(i)) * m.sigma[i] * m.sigma[i] * u.values[i] * u.values[i] * dt;
  }
  return {mean, var};
}

}  // namespace

TEST_CASE("gaussian_central_moments") {
  CHECK(gaussian_central_moments(1.0, 6) == std::vector<double>{1, 0, 3, 0, 15});
  CHECK(gaussian_central_moments(0.0, 4) == std::vector<double>{0, 0, 0});
  CHECK(gaussian_central_moments(0.25, 4) == std::vector<double>{0.25, 0, 0.1875});
  CHECK(code_of([] { gaussian_central_moments(-1e-3, 4); }) == ErrorCode::NegativeVariance);
}

TEST_CASE("conditional_moments closed-form example") {
  const auto m = market();
  const auto mv = conditional_moments(m, constant_strategy(m, 3.75), 0.0, 1.0, 4);
  CHECK(mv.m1 == doctest::Approx(2.125).epsilon(1e-14));
  CHECK(mv.V == doctest::Approx(0.5625).epsilon(1e-14));
  CHECK(mv.central_moment(3) == 0.0);
  CHECK(mv.central_moment(4) == doctest::Approx(0.94921875).epsilon(1e-14));
  CHECK(mv.cumulant_of(2) == mv.V);
  CHECK(mv.cumulant_of(3) == 0.0);
  CHECK(mv.cumulant_of(4) == 0.0);
}

TEST_CASE("conditional_moments degenerate cases") {
  const auto m = market();
  const auto zero = conditional_moments(m, constant_strategy(m, 0.0), 0.0, 1.7, 6);
  CHECK(zero.m1 == 1.7);
  CHECK(zero.V == 0.0);
  for (int k = 2; k <= 6; ++k) CHECK(zero.central_moment(k) == 0.0);

  const auto at_T = conditional_moments(m, constant_strategy(m, 3.75), 1.0, 0.8, 4);
  CHECK(at_T.m1 == 0.8);
  CHECK(at_T.V == 0.0);

  CHECK(code_of([&] { conditional_moments(m, constant_strategy(m, 1.0), 0.005, 1.0, 4); }) ==
        ErrorCode::OffGridTime);
}

TEST_CASE("conditional_moments matches direct sums on random piecewise markets") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    auto m = MarketScenario::constant(0.0, 0.0, 0.0, 0.5 + u(rng), 1.0, 40);
    StrategyGrid s = constant_strategy(m, 0.0);
    for (std::size_t i = 0; i <= m.grid_n; ++i) {
      m.r[i] = 0.08 * u(rng) - 0.02;
      m.theta[i] = 0.6 * u(rng) - 0.1;
      m.sigma[i] = 0.05 + 0.3 * u(rng);
      s.values[i] = 4.0 * u(rng) - 1.0;
    }
    for (std::size_t from : {std::size_t{0}, std::size_t{13}, std::size_t{39}, std::size_t{40}}) {
      const auto mv = conditional_moments(m, s, from, 1.3, 8);
      const auto [mean, var] = mean_variance_by_sums(m, s, from, 1.3);
      CHECK(mv.m1 == doctest::Approx(mean).epsilon(1e-12));
      CHECK(mv.V == doctest::Approx(var).epsilon(1e-12));
      for (int k = 3; k <= 7; k += 2) CHECK(mv.central_moment(k) == 0.0);
      for (int k = 3; k <= 8; ++k) CHECK(mv.cumulant_of(k) == 0.0);
      CHECK(mv.central_moment(8) == doctest::Approx(105.0 * var * var * var * var).epsilon(1e-12));
    }
  }
}

TEST_CASE("variance-to-go is nonincreasing in t") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> z;
  auto m = market(60);
  StrategyGrid s = constant_strategy(m, 0.0);
  for (double& v : s.values) v = 3.0 * z(rng);
  const auto V = variance_to_go(m, s);
  REQUIRE(V.size() == 61);
  CHECK(V.back() == 0.0);
  for (std::size_t i = 1; i < V.size(); ++i) CHECK(V[i] <= V[i - 1]);
}

TEST_CASE("objective_value examples") {
  const auto m = market();
  const auto mv = conditional_moments(m, constant_strategy(m, 3.75), 0.0, 1.0, 4);
  CHECK(objective_value(ObjectiveSpec::mean_variance(1.0), mv) == doctest::Approx(1.5625).epsilon(1e-14));

  ObjectiveSpec mean_only;
  mean_only.add_term({{1, 1}}, 1.0).add_term({{2, 1}}, 0.0).add_term({{4, 1}}, 0.0);
  CHECK(objective_value(mean_only, mv) == mv.m1);

  ObjectiveSpec cumulant;
  cumulant.mode = MomentMode::cumulant;
  cumulant.add_term({{1, 1}}, 1.0).add_term({{2, 1}}, -1.0).add_term({{4, 1}}, -0.5);
  CHECK(objective_value(cumulant, mv) == doctest::Approx(mv.m1 - mv.V).epsilon(1e-15));

  ObjectiveSpec sixth;
  sixth.add_term({{1, 1}}, 1.0).add_term({{6, 1}}, -1.0);
  CHECK(code_of([&] { objective_value(sixth, mv); }) == ErrorCode::OrderMismatch);
}

TEST_CASE("objective_value is linear in the coefficient vector") {
  const auto m = market();
  const auto mv = conditional_moments(m, constant_strategy(m, 2.0), 0.0, 1.0, 6);
  std::mt19937_64 rng(13);
  std::normal_distribution<double> z;
  const std::vector<std::vector<std::pair<int, int>>> shapes = {{{1, 1}}, {{2, 1}}, {{4, 1}}, {{2, 2}}, {{2, 1}, {6, 1}}};
  for (int trial = 0; trial < 50; ++trial) {
    ObjectiveSpec a, b, sum;
    const double alpha = z(rng), beta = z(rng);
    for (const auto& shape : shapes) {
      const double ca = z(rng), cb = z(rng);
      ObjectiveTerm t;
      for (auto [k, e] : shape) t.exponents[static_cast<std::size_t>(k)] = e;
      t.coeff = ca;
      a.terms.push_back(t);
      t.coeff = cb;
      b.terms.push_back(t);
      t.coeff = alpha * ca + beta * cb;
      sum.terms.push_back(t);
    }
    a.max_order = b.max_order = sum.max_order = 6;
    const double lhs = objective_value(sum, mv);
    const double rhs = alpha * objective_value(a, mv) + beta * objective_value(b, mv);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
  }
}

TEST_CASE("Monte Carlo oracle: deterministic dynamics are exact") {
  const auto m = market();
  McOptions o;
  o.paths = 2000;
  const auto est = mc_conditional_moments(m, constant_strategy(m, 0.0), 0.0, 1.4, 4, o);
  CHECK(est.moments.m1 == 1.4);
  CHECK(est.moments.V == 0.0);
  CHECK(est.m1_standard_error == 0.0);
  for (int k = 2; k <= 4; ++k) CHECK(est.standard_errors[static_cast<std::size_t>(k)] == 0.0);
}

TEST_CASE("Monte Carlo oracle: determinism and worker independence") {
  const auto m = market(20);
  const auto s = constant_strategy(m, 3.75);
  McOptions o;
  o.paths = 5000;
  o.seed = 99;
  o.workers = 1;
  const auto a = mc_conditional_moments(m, s, 0.0, 1.0, 6, o);
  const auto b = mc_conditional_moments(m, s, 0.0, 1.0, 6, o);
  o.workers = 4;
  const auto c = mc_conditional_moments(m, s, 0.0, 1.0, 6, o);
  CHECK(a.moments.m1 == b.moments.m1);
  CHECK(a.moments.central == b.moments.central);
  CHECK(a.standard_errors == b.standard_errors);
  CHECK(a.moments.m1 == c.moments.m1);
  CHECK(a.moments.central == c.moments.central);
  o.seed = 100;
  CHECK(mc_conditional_moments(m, s, 0.0, 1.0, 6, o).moments.m1 != a.moments.m1);
}

TEST_CASE("Monte Carlo oracle rejects too few paths") {
  const auto m = market();
  McOptions o;
  o.paths = 999;
  CHECK(code_of([&] { mc_conditional_moments(m, constant_strategy(m, 1.0), 0.0, 1.0, 4, o); }) ==
        ErrorCode::TooFewPaths);
}

TEST_CASE("Monte Carlo agrees with the analytic engine within 4 standard errors") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    auto m = MarketScenario::constant(0.06 * u(rng), 0.1 + 0.4 * u(rng), 0.1 + 0.3 * u(rng), 0.5 + u(rng), 1.0, 20);
    const auto s = constant_strategy(m, 0.5 + 3.0 * u(rng));
    const std::size_t from = trial % 2 ? 5 : 0;
    const auto exact = conditional_moments(m, s, from, 1.0, 6);
    McOptions o;
    o.paths = 100000;
    o.seed = 1000 + static_cast<std::uint64_t>(trial);
    const auto est = mc_conditional_moments(m, s, m.time(from), 1.0, 6, o);
    CHECK(std::abs(est.moments.m1 - exact.m1) <= 4.0 * est.m1_standard_error);
    for (int k = 2; k <= 6; ++k) {
      INFO("trial " << trial << " order " << k);
      CHECK(std::abs(est.moments.central_moment(k) - exact.central_moment(k)) <=
            4.0 * est.standard_errors[static_cast<std::size_t>(k)]);
    }
  }
}
