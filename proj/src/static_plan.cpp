#include "hwctrl/static_plan.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "hwctrl/error.hpp"
#include "hwctrl/simplex.hpp"

namespace hwctrl {

namespace {

std::string edge_name(const Edge& e) {
  return "(" + std::to_string(e.cls + 1) + "," + std::to_string(e.pool + 1) + ")";
}

}  // namespace

Eigen::MatrixXd tree_solve_allocation(const Network& net) {
  const int I = net.I, J = net.J, E = net.num_edges();
  // Node v < I is the class row  sum_j mu_ij nu_j xi_ij = lambda_i,
  // node I + j is the pool row   sum_i xi_ij = 1.
  std::vector<double> rhs(I + J);
  std::vector<int> degree(I + J, 0);
  std::vector<std::vector<int>> incident(I + J);
  for (int i = 0; i < I; ++i) rhs[i] = net.lambda(i);
  for (int j = 0; j < J; ++j) rhs[I + j] = 1.0;
  for (int e = 0; e < E; ++e) {
    incident[net.edges[e].cls].push_back(e);
    incident[I + net.edges[e].pool].push_back(e);
    ++degree[net.edges[e].cls];
    ++degree[I + net.edges[e].pool];
  }
  auto coef = [&](int node, int e) {
    const Edge& ed = net.edges[e];
    return node < I ? net.mu(ed.cls, ed.pool) * net.nu(ed.pool) : 1.0;
  };

  std::vector<double> value(E, 0.0);
  std::vector<char> solved(E, 0);
  std::vector<char> used(I + J, 0);
  for (int step = 0; step < E; ++step) {
    int leaf = -1;
    for (int v = 0; v < I + J && leaf < 0; ++v)
      if (!used[v] && degree[v] == 1) leaf = v;
    if (leaf < 0) throw Error(ErrorCode::Singular, "tree solve found no leaf equation");
    int e = -1;
    for (int k : incident[leaf])
      if (!solved[k]) e = k;
    double c = coef(leaf, e);
    if (std::abs(c) < 1e-300) throw Error(ErrorCode::Singular, "zero pivot on edge " + edge_name(net.edges[e]));
    value[e] = rhs[leaf] / c;
    solved[e] = 1;
    used[leaf] = 1;
    int other = leaf < I ? I + net.edges[e].pool : net.edges[e].cls;
    rhs[other] -= coef(other, e) * value[e];
    degree[leaf] = 0;
    --degree[other];
  }

  // Exactly one equation is left unused; it must hold by itself.
  double scale = std::max(1.0, net.lambda.cwiseAbs().maxCoeff());
  for (int v = 0; v < I + J; ++v) {
    if (!used[v] && std::abs(rhs[v]) > 1e-9 * scale)
      throw Error(ErrorCode::NotCriticallyLoaded,
                  "balance residual " + std::to_string(rhs[v]) + " at " +
                      (v < I ? "class " + std::to_string(v + 1) : "pool " + std::to_string(v - I + 1)));
  }

  Eigen::MatrixXd xi = Eigen::MatrixXd::Zero(I, J);
  for (int e = 0; e < E; ++e) xi(net.edges[e].cls, net.edges[e].pool) = value[e];
  return xi;
}

LpPlan simplex_allocation(const Network& net) {
  const int I = net.I, J = net.J, E = net.num_edges();
  // Variables: xi_e (E), rho, pool slacks (J).
  const int n = E + 1 + J;
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(I + J, n);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(I + J);
  for (int e = 0; e < E; ++e) {
    const Edge& ed = net.edges[e];
    A(ed.cls, e) = net.mu(ed.cls, ed.pool) * net.nu(ed.pool);
    A(I + ed.pool, e) = 1.0;
  }
  for (int i = 0; i < I; ++i) b(i) = net.lambda(i);
  for (int j = 0; j < J; ++j) {
    A(I + j, E) = -1.0;
    A(I + j, E + 1 + j) = 1.0;
  }
  Eigen::VectorXd c = Eigen::VectorXd::Zero(n);
  c(E) = 1.0;

  LpResult lp = solve_lp(A, b, c);
  if (lp.status != LpStatus::Optimal) throw Error(ErrorCode::Singular, "simplex cross-check did not reach an optimum");
  LpPlan out;
  out.xi = Eigen::MatrixXd::Zero(I, J);
  for (int e = 0; e < E; ++e) out.xi(net.edges[e].cls, net.edges[e].pool) = lp.x(e);
  out.rho = lp.x(E);
  return out;
}

StaticPlan solve_static_plan(const Network& net) {
  Eigen::MatrixXd xi = tree_solve_allocation(net);
  for (const Edge& e : net.edges) {
    if (xi(e.cls, e.pool) <= 1e-9)
      throw Error(ErrorCode::PoolingViolated,
                  "allocation on edge " + edge_name(e) + " is " + std::to_string(xi(e.cls, e.pool)));
  }

  LpPlan lp = simplex_allocation(net);
  if (std::abs(lp.rho - 1.0) > 1e-8)
    throw Error(ErrorCode::NotCriticallyLoaded, "optimal utilization is " + std::to_string(lp.rho));
  if ((lp.xi - xi).cwiseAbs().maxCoeff() > 1e-8)
    throw Error(ErrorCode::Singular, "simplex optimum differs from the tree solution; the LP optimum is not unique");

  StaticPlan plan;
  plan.xi_star = xi;
  plan.rho_star = 1.0;
  plan.z_star = xi * net.nu.asDiagonal();
  plan.x_star = plan.z_star.rowwise().sum();
  plan.ell = compute_ell(net, plan);
  return plan;
}

Eigen::VectorXd compute_ell(const Network& net, const StaticPlan& plan) {
  return net.lambda_hat - net.mu_hat.cwiseProduct(plan.z_star).rowwise().sum();
}

}  // namespace hwctrl
