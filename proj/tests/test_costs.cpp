#include <doctest.h>

#include <random>

#include "hwctrl/costs.hpp"
#include "hwctrl/error.hpp"

using namespace hwctrl;

namespace {

CostSpec spec(Eigen::VectorXd xi, Eigen::VectorXd zeta, double m) { return {std::move(xi), std::move(zeta), m}; }

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<int>(v.size()));
  int k = 0;
  for (double x : v) out(k++) = x;
  return out;
}

}  // namespace

TEST_CASE("running cost") {
  CostSpec a = spec(vec({1, 2}), vec({3}), 1.0);
  ControlPoint u{vec({0.5, 0.5}), vec({1})};
  CHECK(running_cost(a, vec({1, -1}), u) == 0.0);
  CHECK(running_cost(a, vec({2, 1}), u) == doctest::Approx(4.5));

  CostSpec b = spec(vec({1, 1}), vec({1, 1}), 2.0);
  ControlPoint v{vec({1, 0}), vec({0.5, 0.5})};
  CHECK(running_cost(b, vec({-1, -1}), v) == doctest::Approx(2.0));
}

TEST_CASE("idleness cost") {
  ControlPoint u{vec({1}), vec({1.0 / 3, 2.0 / 3})};
  CHECK(idleness_cost(0, 1.0, vec({2}), u) == 0.0);
  CHECK(idleness_cost(1, 1.0, vec({0}), u) == 0.0);
  CHECK(idleness_cost(0, 1.0, vec({-3}), u) == doctest::Approx(1.0));
  ControlPoint h{vec({1}), vec({0.5, 0.5})};
  CHECK(idleness_cost(1, 2.0, vec({-2}), h) == doctest::Approx(1.0));
}

TEST_CASE("lagrangian") {
  CostSpec a = spec(vec({1, 1}), vec({0, 0}), 1.0);
  ConstraintSpec c{vec({1, 1}), {}};
  ControlPoint u{vec({1, 0}), vec({0.5, 0.5})};
  Eigen::VectorXd x = vec({-1, -1});
  CHECK(lagrangian(a, c, {vec({0, 0})}, x, u) == running_cost(a, x, u));
  CHECK(lagrangian(a, c, {vec({1, 1})}, x, u) == doctest::Approx(0.0));

  CostSpec b = spec(vec({1, 1}), vec({0}), 1.0);
  ConstraintSpec d{vec({1}), {}};
  ControlPoint w{vec({1, 0}), vec({1})};
  CHECK(lagrangian(b, d, {vec({2})}, vec({3, 1}), w) == doctest::Approx(2.0));
}

TEST_CASE("stage costs reproduce the pointwise costs") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g(0.0, 2.0);
  std::exponential_distribution<double> ex(1.0);
  CostSpec s = spec(vec({1, 2, 0.5}), vec({0, 0}), 1.5);
  ConstraintSpec c{vec({0.4, 0.7}), vec({0.3, 0.7})};
  Multipliers lam{vec({0.8, 1.7})};
  Eigen::VectorXd fair_lam = vec({0.6});
  StageCost L = lagrangian_stage_cost(s, c, lam);
  StageCost F = fair_stage_cost(s, *c.theta, fair_lam);
  for (int k = 0; k < 100; ++k) {
    Eigen::VectorXd x(3);
    for (int i = 0; i < 3; ++i) x(i) = g(rng);
    ControlPoint u{vec({ex(rng), ex(rng), ex(rng)}), vec({ex(rng), ex(rng)})};
    u.uc /= u.uc.sum();
    u.us /= u.us.sum();
    CHECK(stage_cost(s)(x, u) == doctest::Approx(running_cost(s, x, u)).epsilon(1e-13));
    CHECK(L(x, u) == doctest::Approx(lagrangian(s, c, lam, x, u)).epsilon(1e-12));
    double r0 = idleness_cost(0, s.m, x, u), r1 = idleness_cost(1, s.m, x, u);
    double fair = running_cost(s, x, u) + fair_lam(0) * (r0 - c.theta->coeff(0) * (r0 + r1));
    CHECK(F(x, u) == doctest::Approx(fair).epsilon(1e-12));
  }
}

TEST_CASE("convexity in u and homogeneity in x") {
  std::mt19937_64 rng(13);
  std::normal_distribution<double> g(0.0, 2.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::exponential_distribution<double> ex(1.0);
  CostSpec s = spec(vec({1, 3}), vec({2, 0.5}), 2.5);
  auto draw = [&] {
    ControlPoint u{vec({ex(rng), ex(rng)}), vec({ex(rng), ex(rng)})};
    u.uc /= u.uc.sum();
    u.us /= u.us.sum();
    return u;
  };
  for (int k = 0; k < 200; ++k) {
    Eigen::VectorXd x = vec({g(rng), g(rng)});
    ControlPoint a = draw(), b = draw();
    double t = unif(rng);
    ControlPoint mix{t * a.uc + (1 - t) * b.uc, t * a.us + (1 - t) * b.us};
    CHECK(running_cost(s, x, mix) <= t * running_cost(s, x, a) + (1 - t) * running_cost(s, x, b) + 1e-12);
    double c = 0.1 + 3.0 * unif(rng);
    CHECK(running_cost(s, c * x, a) == doctest::Approx(std::pow(c, s.m) * running_cost(s, x, a)).epsilon(1e-12));
  }
}

TEST_CASE("validation") {
  CHECK_THROWS_AS(validate_cost(spec(vec({0, 1}), vec({1}), 1.0), 2, 1), Error);
  CHECK_THROWS_AS(validate_cost(spec(vec({1, 1}), vec({-1}), 1.0), 2, 1), Error);
  CHECK_THROWS_AS(validate_cost(spec(vec({1, 1}), vec({1}), 0.5), 2, 1), Error);
  CHECK_THROWS_AS(validate_cost(spec(vec({1}), vec({1}), 1.0), 2, 1), Error);
  CHECK_NOTHROW(validate_cost(spec(vec({1, 1}), vec({0}), 1.0), 2, 1));
  CHECK_THROWS_AS(validate_constraints({vec({1, 0}), {}}, 2), Error);
  CHECK_THROWS_AS(validate_constraints({vec({1, 1}), vec({1, 0})}, 2), Error);
  CHECK_THROWS_AS(validate_constraints({vec({1, 1}), vec({0.3, 0.3})}, 2), Error);
  CHECK_NOTHROW(validate_constraints({vec({1, 1}), vec({0.3, 0.7})}, 2));
}
