#include <doctest.h>

#include <functional>
#include <random>

#include "helpers.hpp"
#include "hwctrl/error.hpp"
#include "oracles.hpp"

using namespace hwctrl;
using testing::make_spec;

namespace {

using PsiForm = std::function<Eigen::MatrixXd(const Eigen::VectorXd&, const Eigen::VectorXd&)>;

std::pair<Eigen::VectorXd, Eigen::VectorXd> random_dg(int I, int J, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 2.0);
  Eigen::VectorXd a(I), b(J);
  for (int i = 0; i < I; ++i) a(i) = g(rng);
  for (int j = 0; j < J; ++j) b(j) = g(rng);
  b(J - 1) += a.sum() - b.sum();
  return {a, b};
}

double max_gap(const Network& net, const PsiForm& printed, int draws = 100) {
  EliminationResult e = eliminate(net);
  std::mt19937_64 rng(7);
  double gap = 0.0;
  for (int k = 0; k < draws; ++k) {
    auto [a, b] = random_dg(net.I, net.J, rng);
    gap = std::max(gap, (evaluate_psi(net, e, a, b) - printed(a, b)).cwiseAbs().maxCoeff());
  }
  return gap;
}

// b(x,u) through the dense oracle G-map.
Eigen::VectorXd oracle_drift(const Network& net, const Eigen::VectorXd& ell, const Eigen::VectorXd& x,
                             const ControlPoint& u) {
  double s = x.sum();
  Eigen::VectorXd alpha = x - std::max(s, 0.0) * u.uc;
  Eigen::VectorXd beta = -std::max(-s, 0.0) * u.us;
  Eigen::MatrixXd G = oracle::dense_gmap(net.I, net.J, testing::edge_list(net), alpha, beta);
  Eigen::VectorXd b(net.I);
  for (int i = 0; i < net.I; ++i)
    b(i) = -(net.mu.row(i).array() * G.row(i).array()).sum() - net.gamma(i) * std::max(s, 0.0) * u.uc(i) + ell(i);
  return b;
}

Eigen::VectorXd affine_drift(const Eigen::MatrixXd& B1, const Eigen::MatrixXd& B2, const Eigen::VectorXd& gamma,
                             const Eigen::VectorXd& ell, const Eigen::VectorXd& x, const ControlPoint& u) {
  double sp = std::max(x.sum(), 0.0), sn = std::max(-x.sum(), 0.0);
  return -B1 * (x - sp * u.uc) + sn * B2 * u.us - sp * gamma.cwiseProduct(u.uc) + ell;
}

ControlPoint random_control(int I, int J, std::mt19937_64& rng) {
  std::exponential_distribution<double> ex(1.0);
  ControlPoint u{Eigen::VectorXd(I), Eigen::VectorXd(J)};
  for (int i = 0; i < I; ++i) u.uc(i) = ex(rng);
  for (int j = 0; j < J; ++j) u.us(j) = ex(rng);
  u.uc /= u.uc.sum();
  u.us /= u.us.sum();
  return u;
}

double oracle_mismatch(const Network& net, const Eigen::MatrixXd& B1, const Eigen::MatrixXd& B2) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 3.0);
  Eigen::VectorXd ell = Eigen::VectorXd::Zero(net.I);
  double worst = 0.0;
  for (int k = 0; k < 200; ++k) {
    Eigen::VectorXd x(net.I);
    for (int i = 0; i < net.I; ++i) x(i) = g(rng);
    ControlPoint u = random_control(net.I, net.J, rng);
    worst = std::max(worst, (oracle_drift(net, ell, x, u) - affine_drift(B1, B2, net.gamma, ell, x, u)).cwiseAbs().maxCoeff());
  }
  return worst;
}

const double m11 = 1.3, m12 = 2.1, m21 = 0.7, m22 = 1.9, m23 = 2.9, m32 = 1.1, m33 = 1.7, m43 = 0.6;

}  // namespace

TEST_CASE("printed Psi forms") {
  SUBCASE("N") {
    Network net = validate_network(make_spec(2, 2, {{1, 1, m11}, {1, 2, m12}, {2, 2, m22}}));
    CHECK(max_gap(net, [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
            Eigen::MatrixXd P(2, 2);
            P << b(0), a(0) - b(0), 0, a(1);
            return P;
          }) <= 1e-10);
    EliminationResult e = eliminate(net);
    CHECK(e.order == std::vector<int>{0, 1});
  }
  SUBCASE("W") {
    Network net = validate_network(make_spec(3, 2, {{1, 1, m11}, {2, 1, m21}, {2, 2, m22}, {3, 2, m32}}));
    CHECK(max_gap(net, [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
            Eigen::MatrixXd P(3, 2);
            P << a(0), 0, b(0) - a(0), a(1) - (b(0) - a(0)), 0, a(2);
            return P;
          }) <= 1e-10);
    CHECK(eliminate(net).order == std::vector<int>{0, 1, 2});
  }
  SUBCASE("M") {
    Network net = validate_network(make_spec(2, 3, {{1, 1, m11}, {1, 2, m12}, {2, 2, m22}, {2, 3, m23}}));
    CHECK(max_gap(net, [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
            Eigen::MatrixXd P(2, 3);
            P << b(0), a(0) - b(0), 0, 0, a(1) - b(2), b(2);
            return P;
          }) <= 1e-10);
  }
  SUBCASE("Example 4") {
    Network net = validate_network(
        make_spec(4, 3, {{1, 1, m11}, {2, 1, m21}, {2, 2, m22}, {2, 3, m23}, {3, 3, m33}, {4, 3, m43}}));
    CHECK(max_gap(net, [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
            Eigen::MatrixXd P = Eigen::MatrixXd::Zero(4, 3);
            P(0, 0) = a(0);
            P(1, 0) = b(0) - a(0);
            P(1, 1) = b(1);
            P(1, 2) = (a(1) - b(1)) - (b(0) - a(0));
            P(2, 2) = a(2);
            P(3, 2) = a(3);
            return P;
          }) <= 1e-10);
    CHECK(eliminate(net).order == std::vector<int>{0, 1, 2, 3});
  }
}

TEST_CASE("solve_gmap examples") {
  Network N = validate_network(make_spec(2, 2, {{1, 1, 1}, {1, 2, 1}, {2, 2, 1}}));
  Eigen::MatrixXd want(2, 2);
  want << 2, 1, 0, 1;
  CHECK((solve_gmap(N, Eigen::Vector2d(3, 1), Eigen::Vector2d(2, 2)) - want).cwiseAbs().maxCoeff() == 0.0);
  CHECK(solve_gmap(N, Eigen::Vector2d::Zero(), Eigen::Vector2d::Zero()).cwiseAbs().maxCoeff() == 0.0);

  Network M = validate_network(make_spec(2, 3, {{1, 1, 1}, {1, 2, 1}, {2, 2, 1}, {2, 3, 1}}));
  Eigen::MatrixXd wantM(2, 3);
  wantM << 1, 1, 0, 0, 1, 2;
  CHECK((solve_gmap(M, Eigen::Vector2d(2, 3), Eigen::Vector3d(1, 2, 2)) - wantM).cwiseAbs().maxCoeff() == 0.0);

  try {
    solve_gmap(N, Eigen::Vector2d(1, 1), Eigen::Vector2d(1, 0));
    FAIL("expected NotInDomainDG");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NotInDomainDG);
  }
}

TEST_CASE("ghat") {
  Network N = validate_network(make_spec(2, 2, {{1, 1, 1}, {1, 2, 1}, {2, 2, 1}}));
  ControlPoint u{Eigen::Vector2d(1, 0), Eigen::Vector2d(1, 0)};
  Eigen::MatrixXd want(2, 2);
  want << 0, -1, 0, 1;
  CHECK((ghat(N, Eigen::Vector2d(1, 1), u) - want).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(ghat(N, Eigen::Vector2d::Zero(), u).cwiseAbs().maxCoeff() == 0.0);
  Eigen::Vector2d x(2.5, -2.5);
  CHECK((ghat(N, x, u) - solve_gmap(N, x, Eigen::Vector2d::Zero())).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("drift examples") {
  NetworkSpec s = make_spec(2, 2, {{1, 1, 1}, {1, 2, 2}, {2, 2, 3}});
  s.classes[0] = {2.0, 0.0, 0.5};
  s.classes[1] = {1.5, 0.0, 0.5};
  testing::Model m = testing::build(s);
  ControlPoint u{Eigen::Vector2d(1, 0), Eigen::Vector2d(1, 0)};
  CHECK((drift(m.net, m.plan, Eigen::Vector2d(1, 1), u) - Eigen::Vector2d(1, -3)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((drift(m.net, m.plan, Eigen::Vector2d::Zero(), u) - m.plan.ell).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("inverted-V drift, first displayed line") {
  testing::Model m = testing::build(testing::load("inverted_v").network);
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g(0.0, 2.0);
  Eigen::VectorXd mu = m.net.mu.row(0).transpose();
  for (int k = 0; k < 200; ++k) {
    double x = g(rng);
    ControlPoint u = random_control(1, 2, rng);
    double want = oracle::inverted_v_drift(x, mu, u.us, m.net.gamma(0), m.plan.ell(0));
    CHECK(std::abs(drift(m.form, Eigen::VectorXd::Constant(1, x), u)(0) - want) < 1e-12);
  }
}

TEST_CASE("drift matrices") {
  SUBCASE("N") {
    Network net = validate_network(make_spec(2, 2, {{1, 1, m11}, {1, 2, m12}, {2, 2, m22}}));
    Eigen::MatrixXd B1, B2;
    drift_matrices(net, eliminate(net), B1, B2);
    Eigen::MatrixXd w1(2, 2), w2(2, 2);
    w1 << m12, 0, 0, m22;
    w2 << m11 - m12, 0, 0, 0;
    CHECK((B1 - w1).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((B2 - w2).cwiseAbs().maxCoeff() < 1e-14);
    CHECK(oracle_mismatch(net, B1, B2) < 1e-9);
  }
  SUBCASE("M") {
    Network net = validate_network(make_spec(2, 3, {{1, 1, m11}, {1, 2, m12}, {2, 2, m22}, {2, 3, m23}}));
    Eigen::MatrixXd B1, B2;
    drift_matrices(net, eliminate(net), B1, B2);
    Eigen::MatrixXd w1(2, 2), w2(2, 3);
    w1 << m12, 0, 0, m22;
    w2 << m11 - m12, 0, 0, 0, 0, m23 - m22;
    CHECK((B1 - w1).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((B2 - w2).cwiseAbs().maxCoeff() < 1e-14);
    CHECK(oracle_mismatch(net, B1, B2) < 1e-9);
  }
  SUBCASE("W: computed form follows the G-map, the printed (2,1) entry does not") {
    Network net = validate_network(make_spec(3, 2, {{1, 1, m11}, {2, 1, m21}, {2, 2, m22}, {3, 2, m32}}));
    Eigen::MatrixXd B1, B2;
    drift_matrices(net, eliminate(net), B1, B2);
    Eigen::MatrixXd w1(3, 3), w2 = Eigen::MatrixXd::Zero(3, 2);
    w1 << m11, 0, 0, m22 - m21, m22, 0, 0, 0, m32;
    w2(1, 0) = m21 - m22;
    CHECK((B1 - w1).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((B2 - w2).cwiseAbs().maxCoeff() < 1e-14);
    CHECK(oracle_mismatch(net, B1, B2) < 1e-9);
    Eigen::MatrixXd printed = w1;
    printed(1, 0) = m21 + m22;
    CHECK(oracle_mismatch(net, printed, w2) > 1e-3);
  }
  SUBCASE("Example 4: B1 as printed, B2 row 2 follows the G-map") {
    Network net = validate_network(
        make_spec(4, 3, {{1, 1, m11}, {2, 1, m21}, {2, 2, m22}, {2, 3, m23}, {3, 3, m33}, {4, 3, m43}}));
    Eigen::MatrixXd B1, B2;
    drift_matrices(net, eliminate(net), B1, B2);
    Eigen::MatrixXd w1 = Eigen::MatrixXd::Zero(4, 4);
    w1.diagonal() << m11, m23, m33, m43;
    w1(1, 0) = -m21 + m23;
    CHECK((B1 - w1).cwiseAbs().maxCoeff() < 1e-14);
    Eigen::MatrixXd w2 = Eigen::MatrixXd::Zero(4, 3);
    w2(1, 0) = m21 - m23;
    w2(1, 1) = m22 - m23;
    CHECK((B2 - w2).cwiseAbs().maxCoeff() < 1e-14);
    CHECK(oracle_mismatch(net, B1, B2) < 1e-9);
    Eigen::MatrixXd printed2 = Eigen::MatrixXd::Zero(4, 3);
    printed2(1, 0) = -m21 - m23;
    printed2(1, 1) = -m23;
    CHECK(oracle_mismatch(net, B1, printed2) > 1e-3);
  }
}

TEST_CASE("extracted forms are triangular with positive diagonal") {
  for (const char* name : {"n_model", "w_model", "m_model", "m_model_separated", "example4", "inverted_v",
                           "mmn_abandonment"}) {
    CAPTURE(name);
    testing::Model m = testing::build(testing::load(name).network);
    const DriftForm& f = m.form;
    for (int r = 0; r < f.I(); ++r) {
      CHECK(f.B1(f.perm[r], f.perm[r]) > 0.0);
      for (int c = r + 1; c < f.I(); ++c) CHECK(f.B1(f.perm[r], f.perm[c]) == 0.0);
    }
    CHECK((f.sigma.array().square() - 2.0 * m.net.lambda.array()).abs().maxCoeff() < 1e-12);
    CHECK(oracle_mismatch(m.net, f.B1, f.B2) < 1e-9);
  }
}

TEST_CASE("random trees: oracle agreement, linearity, order independence, coefficient structure") {
  std::mt19937_64 rng(2024);
  for (int t = 0; t < 30; ++t) {
    int I = 1 + static_cast<int>(rng() % 8), J = 1 + static_cast<int>(rng() % 8);
    // Attach each new node to a random existing node of the other kind.
    std::vector<int> cls{0}, pools;
    std::vector<std::tuple<int, int, double>> edges;
    int ni = 1, nj = 0;
    while (ni < I || nj < J) {
      bool add_pool = nj < J && (ni == I || rng() % 2 == 0);
      if (add_pool) {
        int c = cls[rng() % cls.size()];
        edges.emplace_back(c + 1, nj + 1, 1.0 + (rng() % 100) / 50.0);
        pools.push_back(nj++);
      } else if (!pools.empty()) {
        int p = pools[rng() % pools.size()];
        edges.emplace_back(ni + 1, p + 1, 1.0 + (rng() % 100) / 50.0);
        cls.push_back(ni++);
      } else {
        continue;
      }
    }
    CAPTURE(I);
    CAPTURE(J);
    Network net = validate_network(make_spec(I, J, edges));
    EliminationResult e1 = eliminate(net);
    EliminationResult e2 = eliminate(net, {LeafOrder::LargestIndex, {}});
    for (int k = 0; k < 20; ++k) {
      auto [a, b] = random_dg(I, J, rng);
      auto [c, d] = random_dg(I, J, rng);
      Eigen::MatrixXd P = evaluate_psi(net, e1, a, b);
      CHECK((P - oracle::dense_gmap(I, J, testing::edge_list(net), a, b)).cwiseAbs().maxCoeff() <= 1e-10);
      CHECK((P - evaluate_psi(net, e2, a, b)).cwiseAbs().maxCoeff() <= 1e-10);
      Eigen::MatrixXd L = evaluate_psi(net, e1, 2.0 * a - 0.5 * c, 2.0 * b - 0.5 * d);
      CHECK((L - (2.0 * P - 0.5 * evaluate_psi(net, e1, c, d))).cwiseAbs().maxCoeff() <= 1e-10);
    }
    // The edge fixed at customer step k involves no alpha of a class removed later.
    for (int k = 0; k < I; ++k) {
      int i = e1.order[k];
      int e = -1;
      for (int q = 0; q < net.num_edges(); ++q)
        if (net.edges[q] == Edge{i, e1.j_of[i]}) e = q;
      REQUIRE(e >= 0);
      for (int later = k + 1; later < I; ++later) CHECK(e1.A(e, e1.order[later]) == 0);
      CHECK(e1.pi[i] == k);
    }
  }
}

TEST_CASE("drift is continuous across e.x = 0") {
  testing::Model m = testing::build(testing::load("example4").network);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int k = 0; k < 50; ++k) {
    Eigen::VectorXd x(4);
    for (int i = 0; i < 4; ++i) x(i) = g(rng);
    x.array() -= x.mean();
    ControlPoint u = random_control(4, 3, rng);
    Eigen::VectorXd up = x, dn = x;
    up(0) += 1e-8;
    dn(0) -= 1e-8;
    CHECK((drift(m.net, m.plan, up, u) - drift(m.net, m.plan, dn, u)).cwiseAbs().maxCoeff() < 1e-6);
  }
}
