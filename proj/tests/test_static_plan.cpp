#include <doctest.h>

#include "helpers.hpp"
#include "hwctrl/error.hpp"
#include "hwctrl/simplex.hpp"

using namespace hwctrl;
using testing::make_spec;

namespace {

NetworkSpec n_model(double l1, double l2) {
  NetworkSpec s = make_spec(2, 2, {{1, 1, 1}, {1, 2, 1}, {2, 2, 1}});
  s.classes[0].lambda = l1;
  s.classes[1].lambda = l2;
  return s;
}

// xi from the square system  sum_j mu nu xi = lambda,  sum_i xi = 1.
Eigen::MatrixXd hand_solve(const Network& net) {
  const int E = net.num_edges();
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(net.I + net.J, E);
  Eigen::VectorXd b(net.I + net.J);
  for (int e = 0; e < E; ++e) {
    auto [i, j] = net.edges[e];
    A(i, e) = net.mu(i, j) * net.nu(j);
    A(net.I + j, e) = 1.0;
  }
  b << net.lambda, Eigen::VectorXd::Ones(net.J);
  Eigen::VectorXd xi = A.colPivHouseholderQr().solve(b);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(net.I, net.J);
  for (int e = 0; e < E; ++e) out(net.edges[e].cls, net.edges[e].pool) = xi(e);
  return out;
}

}  // namespace

TEST_CASE("N model plan") {
  Network net = validate_network(n_model(1.5, 0.5));
  StaticPlan p = solve_static_plan(net);
  Eigen::MatrixXd xi(2, 2);
  xi << 1, 0.5, 0, 0.5;
  CHECK((p.xi_star - xi).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((p.xi_star - hand_solve(net)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(p.rho_star == doctest::Approx(1.0).epsilon(1e-12));
  CHECK((p.x_star - Eigen::Vector2d(1.5, 0.5)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((p.z_star - xi).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("single edge plan") {
  NetworkSpec s = make_spec(1, 1, {{1, 1, 1}}, 2.0);
  s.nu[0] = 2.0;
  StaticPlan p = solve_static_plan(validate_network(s));
  CHECK(p.xi_star(0, 0) == doctest::Approx(1.0));
  CHECK(p.x_star(0) == doctest::Approx(2.0));
  CHECK(p.rho_star == doctest::Approx(1.0));
}

TEST_CASE("degenerate N model violates pooling") {
  Network net = validate_network(n_model(1.0, 1.0));
  try {
    solve_static_plan(net);
    FAIL("expected PoolingViolated");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::PoolingViolated);
  }
}

TEST_CASE("overloaded system is not critically loaded") {
  Network net = validate_network(n_model(3.0, 0.5));
  CHECK_THROWS_AS(solve_static_plan(net), Error);
}

TEST_CASE("tree solve agrees with the simplex on the golden networks") {
  for (const char* name : {"n_model", "w_model", "m_model", "m_model_separated", "example4", "inverted_v",
                           "mmn_abandonment"}) {
    CAPTURE(name);
    Network net = validate_network(testing::load(name).network);
    StaticPlan p = solve_static_plan(net);
    LpPlan lp = simplex_allocation(net);
    CHECK((tree_solve_allocation(net) - lp.xi).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(lp.rho == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(std::abs(p.x_star.sum() - net.nu.sum()) < 1e-10);
    for (int j = 0; j < net.J; ++j) CHECK(std::abs(p.xi_star.col(j).sum() - 1.0) < 1e-10);
    for (int i = 0; i < net.I; ++i)
      CHECK(std::abs((net.mu.row(i).array() * net.nu.transpose().array() * p.xi_star.row(i).array()).sum() -
                     net.lambda(i)) < 1e-10);
    for (const Edge& e : net.edges) CHECK(p.xi_star(e.cls, e.pool) > 0.0);
  }
}

TEST_CASE("scaling lambda and nu together") {
  Network a = validate_network(testing::load("example4").network);
  NetworkSpec s = testing::load("example4").network;
  for (auto& c : s.classes) c.lambda *= 3.0;
  for (auto& v : s.nu) v *= 3.0;
  Network b = validate_network(s);
  StaticPlan pa = solve_static_plan(a), pb = solve_static_plan(b);
  CHECK((pa.xi_star - pb.xi_star).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((3.0 * pa.x_star - pb.x_star).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((3.0 * pa.z_star - pb.z_star).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("ell") {
  NetworkSpec s = n_model(1.5, 0.5);
  s.classes[0].lambda_hat = 0.3;
  s.classes[1].lambda_hat = -0.1;
  StaticPlan p = solve_static_plan(validate_network(s));
  CHECK((p.ell - Eigen::Vector2d(0.3, -0.1)).cwiseAbs().maxCoeff() < 1e-14);

  NetworkSpec t = n_model(1.5, 0.5);
  t.edges[0].mu_hat = 1.0;
  Network net = validate_network(t);
  StaticPlan q = solve_static_plan(net);
  CHECK((compute_ell(net, q) - Eigen::Vector2d(-1.0, 0.0)).cwiseAbs().maxCoeff() < 1e-12);

  StaticPlan z = solve_static_plan(validate_network(n_model(1.5, 0.5)));
  CHECK(z.ell.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("simplex on small LPs") {
  // max x + y  s.t. x + 2y <= 4, 3x + y <= 6, with slacks  ->  (1.6, 1.2)
  Eigen::MatrixXd A(2, 4);
  A << 1, 2, 1, 0, 3, 1, 0, 1;
  Eigen::Vector4d c(-1, -1, 0, 0);
  LpResult r = solve_lp(A, Eigen::Vector2d(4, 6), c);
  REQUIRE(r.status == LpStatus::Optimal);
  CHECK(r.x(0) == doctest::Approx(1.6));
  CHECK(r.x(1) == doctest::Approx(1.2));
  CHECK(r.objective == doctest::Approx(-2.8));

  Eigen::MatrixXd B(1, 2);
  B << 1, 1;
  CHECK(solve_lp(B, Eigen::VectorXd::Constant(1, -1.0), Eigen::Vector2d(1, 1)).status == LpStatus::Infeasible);
  Eigen::MatrixXd C(1, 2);
  C << 1, -1;
  CHECK(solve_lp(C, Eigen::VectorXd::Constant(1, 1.0), Eigen::Vector2d(-1, 0)).status == LpStatus::Unbounded);
}
