#include "hwctrl/leaf_elimination.hpp"

#include <cmath>
#include <string>

#include "hwctrl/error.hpp"

namespace hwctrl {

namespace {

struct Expr {
  Eigen::VectorXi a;
  Eigen::VectorXi b;
};

}  // namespace

EliminationResult eliminate(const Network& net, const EliminationOptions& opts) {
  const int I = net.I, J = net.J, E = net.num_edges();
  std::vector<Expr> alpha(I), beta(J);
  for (int i = 0; i < I; ++i) {
    alpha[i] = {Eigen::VectorXi::Unit(I, i), Eigen::VectorXi::Zero(J)};
  }
  for (int j = 0; j < J; ++j) {
    beta[j] = {Eigen::VectorXi::Zero(I), Eigen::VectorXi::Unit(J, j)};
  }

  std::vector<char> edge_alive(E, 1), class_alive(I, 1);
  std::vector<int> class_deg(I, 0), pool_deg(J, 0);
  for (const Edge& e : net.edges) {
    ++class_deg[e.cls];
    ++pool_deg[e.pool];
  }
  auto alive_edge_of_pool = [&](int j) {
    for (int e = 0; e < E; ++e)
      if (edge_alive[e] && net.edges[e].pool == j) return e;
    return -1;
  };
  auto alive_edge_of_class = [&](int i) {
    for (int e = 0; e < E; ++e)
      if (edge_alive[e] && net.edges[e].cls == i) return e;
    return -1;
  };
  auto index_at = [&](int k, int n) { return opts.order == LeafOrder::SmallestIndex ? k : n - 1 - k; };

  EliminationResult out;
  out.A = Eigen::MatrixXi::Zero(E, I);
  out.Bc = Eigen::MatrixXi::Zero(E, J);
  out.pi.assign(I, -1);
  out.j_of.assign(I, -1);

  for (int step = 0; step < I; ++step) {
    // Pool leaves. A pool whose only neighbour is itself a leaf is the last edge;
    // it is closed by the class step below.
    for (int k = 0; k < J; ++k) {
      int j = index_at(k, J);
      if (pool_deg[j] != 1) continue;
      int e = alive_edge_of_pool(j);
      int i = net.edges[e].cls;
      if (class_deg[i] == 1) continue;
      out.A.row(e) = beta[j].a.transpose();
      out.Bc.row(e) = beta[j].b.transpose();
      alpha[i].a -= beta[j].a;
      alpha[i].b -= beta[j].b;
      edge_alive[e] = 0;
      pool_deg[j] = 0;
      --class_deg[i];
    }

    int remaining = I - step;
    int chosen = -1;
    for (int k = 0; k < I && chosen < 0; ++k) {
      int i = index_at(k, I);
      if (!class_alive[i] || class_deg[i] != 1) continue;
      if (opts.keep_last && *opts.keep_last == i && remaining > 1) continue;
      chosen = i;
    }
    if (chosen < 0) throw Error(ErrorCode::NotATree, "leaf elimination stalled at step " + std::to_string(step + 1));

    int e = alive_edge_of_class(chosen);
    int j = net.edges[e].pool;
    out.A.row(e) = alpha[chosen].a.transpose();
    out.Bc.row(e) = alpha[chosen].b.transpose();
    beta[j].a -= alpha[chosen].a;
    beta[j].b -= alpha[chosen].b;
    edge_alive[e] = 0;
    class_alive[chosen] = 0;
    class_deg[chosen] = 0;
    --pool_deg[j];
    out.order.push_back(chosen);
    out.pi[chosen] = step;
    out.j_of[chosen] = j;
  }
  return out;
}

Eigen::MatrixXd evaluate_psi(const Network& net, const EliminationResult& elim, const Eigen::VectorXd& alpha,
                             const Eigen::VectorXd& beta) {
  Eigen::VectorXd flat = elim.A.cast<double>() * alpha + elim.Bc.cast<double>() * beta;
  Eigen::MatrixXd psi = Eigen::MatrixXd::Zero(net.I, net.J);
  for (int e = 0; e < net.num_edges(); ++e) psi(net.edges[e].cls, net.edges[e].pool) = flat(e);
  return psi;
}

Eigen::MatrixXd solve_gmap(const Network& net, const EliminationResult& elim, const Eigen::VectorXd& alpha,
                           const Eigen::VectorXd& beta) {
  if (alpha.size() != net.I || beta.size() != net.J)
    throw Error(ErrorCode::ShapeMismatch, "alpha must have length I and beta length J");
  double scale = std::max({1.0, alpha.cwiseAbs().sum(), beta.cwiseAbs().sum()});
  if (std::abs(alpha.sum() - beta.sum()) > 1e-9 * scale)
    throw Error(ErrorCode::NotInDomainDG, "e.alpha = " + std::to_string(alpha.sum()) +
                                              " but e.beta = " + std::to_string(beta.sum()));
  return evaluate_psi(net, elim, alpha, beta);
}

Eigen::MatrixXd solve_gmap(const Network& net, const Eigen::VectorXd& alpha, const Eigen::VectorXd& beta) {
  return solve_gmap(net, eliminate(net), alpha, beta);
}

Eigen::MatrixXd ghat(const Network& net, const EliminationResult& elim, const Eigen::VectorXd& x,
                     const ControlPoint& u) {
  double s = x.sum();
  return evaluate_psi(net, elim, x - pos(s) * u.uc, -neg(s) * u.us);
}

Eigen::MatrixXd ghat(const Network& net, const Eigen::VectorXd& x, const ControlPoint& u) {
  return ghat(net, eliminate(net), x, u);
}

}  // namespace hwctrl
