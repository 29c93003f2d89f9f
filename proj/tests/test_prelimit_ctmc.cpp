#include <doctest.h>

#include <random>

#include "helpers.hpp"
#include "hwctrl/prelimit_ctmc.hpp"
#include "oracles.hpp"

using namespace hwctrl;
using testing::make_spec;

namespace {

NetworkSpec n_model() {
  NetworkSpec s = make_spec(2, 2, {{1, 1, 1}, {1, 2, 1}, {2, 2, 1}});
  s.classes[0] = {1.5, 0.0, 1.0};
  s.classes[1] = {0.5, 0.0, 1.0};
  return s;
}

}  // namespace

TEST_CASE("n-th system parameters") {
  NetworkSpec s = make_spec(1, 1, {{1, 1, 1}});
  s.edges[0].mu_hat = 2.0;
  s.nu[0] = 1.5;
  s.classes[0].lambda = 1.5;
  Network net = validate_network(s);
  NthSystem a = build_nth_system(net, 100);
  CHECK(a.lambda_n(0) == doctest::Approx(150.0));
  CHECK(a.N_n(0) == 150);
  NthSystem b = build_nth_system(net, 4);
  CHECK(b.mu_n(0, 0) == doctest::Approx(2.0));
  CHECK(b.N_n(0) == 6);

  NetworkSpec t = make_spec(1, 1, {{1, 1, 1}});
  Network one = validate_network(t);
  CHECK(build_nth_system(one, 100).lambda_n(0) == doctest::Approx(100.0));
}

TEST_CASE("policy at the fluid point") {
  testing::Model m = testing::build(n_model());
  NthSystem sys = build_nth_system(m.net, 100);
  EliminationResult elim = eliminate(m.net);
  MarkovControl c = MarkovControl::constant(ControlPoint::vertex(2, 2, 0, 1));
  CtmcState st = policy_from_control(m.net, sys, m.plan, elim, c, Eigen::Vector2i(150, 50));
  CHECK(st.Q.sum() == 0);
  CHECK(st.Y.sum() == 0);
  CHECK((st.Z.cast<double>() - 100.0 * m.plan.z_star).cwiseAbs().maxCoeff() < 1e-9);
  CHECK_FALSE(st.fallback);
}

TEST_CASE("small N system by hand") {
  testing::Model m = testing::build(n_model());
  NthSystem sys = build_nth_system(m.net, 1);
  REQUIRE(sys.N_n == Eigen::Vector2i(1, 1));
  EliminationResult elim = eliminate(m.net);
  MarkovControl c = MarkovControl::constant(ControlPoint::vertex(2, 2, 0, 0));
  CtmcState st = policy_from_control(m.net, sys, m.plan, elim, c, Eigen::Vector2i(2, 1));
  CHECK(st.Q == Eigen::Vector2i(1, 0));
  CHECK(st.Y == Eigen::Vector2i(0, 0));
  Eigen::MatrixXi Z(2, 2);
  Z << 1, 0, 0, 1;
  CHECK(st.Z == Z);
}

TEST_CASE("idleness goes where u^s points") {
  testing::Model m = testing::build(n_model());
  NthSystem sys = build_nth_system(m.net, 100);
  EliminationResult elim = eliminate(m.net);
  MarkovControl c = MarkovControl::constant(ControlPoint::vertex(2, 2, 0, 1));
  CtmcState st = policy_from_control(m.net, sys, m.plan, elim, c, Eigen::Vector2i(140, 50));
  CHECK(st.Y == Eigen::Vector2i(0, 10));
  CHECK(std::min(st.Q.sum(), st.Y.sum()) == 0);
  CHECK(balance_holds(m.net, sys, st));
}

TEST_CASE("apportionment and balance over random states") {
  std::mt19937_64 rng(4);
  Eigen::VectorXi a = apportion(10, Eigen::Vector3d(1, 1, 1));
  CHECK(a.sum() == 10);
  CHECK(a == Eigen::Vector3i(4, 3, 3));
  CHECK(apportion(7, Eigen::Vector2d(0, 1)) == Eigen::Vector2i(0, 7));

  testing::Model m = testing::build(testing::load("example4").network);
  NthSystem sys = build_nth_system(m.net, 100);
  EliminationResult elim = eliminate(m.net);
  std::exponential_distribution<double> ex(1.0);
  std::normal_distribution<double> g(0.0, 15.0);
  for (int k = 0; k < 300; ++k) {
    ControlPoint u{Eigen::VectorXd(4), Eigen::VectorXd(3)};
    for (int i = 0; i < 4; ++i) u.uc(i) = ex(rng);
    for (int j = 0; j < 3; ++j) u.us(j) = ex(rng);
    u.uc /= u.uc.sum();
    u.us /= u.us.sum();
    Eigen::VectorXi X(4);
    for (int i = 0; i < 4; ++i) X(i) = std::max(0, static_cast<int>(std::lround(100.0 * m.plan.x_star(i) + g(rng))));
    CtmcState st = policy_from_control(m.net, sys, m.plan, elim, MarkovControl::constant(u), X);
    CHECK(balance_holds(m.net, sys, st));
    if (!st.fallback) {
      long s = X.sum() - sys.N_n.sum();
      CHECK(st.Q.sum() == std::max(s, 0L));
      CHECK(st.Y.sum() == std::max(-s, 0L));
    }
  }
}

TEST_CASE("Erlang-A distribution") {
  Eigen::VectorXd p = erlang_a_distribution(100.0, 1.0, 0.5, 100);
  CHECK(p.sum() == doctest::Approx(1.0).epsilon(1e-12));
  double q = 0.0;
  for (int k = 101; k < p.size(); ++k) q += (k - 100) * p(k);
  CHECK(q == doctest::Approx(oracle::erlang_a_mean_queue(100.0, 1.0, 0.5, 100)).epsilon(1e-9));
}

TEST_CASE("M/M/N+M simulation against Erlang-A") {
  testing::Model m = testing::build(testing::load("mmn_abandonment").network);
  NthSystem sys = build_nth_system(m.net, 100);
  CtmcConfig cfg;
  cfg.horizon = 2000.0;
  cfg.seed = 3;
  StageCost cost{Eigen::VectorXd::Ones(1), Eigen::VectorXd::Zero(1), 1.0, 1.0, 0.0};
  MarkovControl c = MarkovControl::constant({Eigen::VectorXd::Ones(1), Eigen::VectorXd::Ones(1)});
  CtmcEstimate e = simulate_ctmc(m.net, sys, m.plan, c, cost, cfg);
  double want = oracle::erlang_a_mean_queue(sys.lambda_n(0), sys.mu_n(0, 0), sys.gamma_n(0), sys.N_n(0)) / 10.0;
  CHECK(std::abs(e.scaled_queue[0].mean - want) <= e.scaled_queue[0].half_width);
  CHECK(e.events > 0);

  CtmcEstimate again = simulate_ctmc(m.net, sys, m.plan, c, cost, cfg);
  CHECK(again.cost.mean == e.cost.mean);
  CHECK(again.events == e.events);
}

TEST_CASE("fast abandonment empties the queue") {
  NetworkSpec s = make_spec(1, 1, {{1, 1, 1}}, 1.0, 200.0);
  testing::Model m = testing::build(s);
  NthSystem sys = build_nth_system(m.net, 25);
  CtmcConfig cfg;
  cfg.horizon = 200.0;
  StageCost cost{Eigen::VectorXd::Ones(1), Eigen::VectorXd::Zero(1), 1.0, 1.0, 0.0};
  CtmcEstimate e = simulate_ctmc(m.net, sys, m.plan, MarkovControl::constant({Eigen::VectorXd::Ones(1), Eigen::VectorXd::Ones(1)}),
                                 cost, cfg);
  CHECK(e.scaled_queue[0].mean < 0.01);
}
