#pragma once

#include <Eigen/Dense>

#include "hwctrl/network.hpp"

namespace hwctrl {

struct StaticPlan {
  Eigen::MatrixXd xi_star;  // I x J
  double rho_star = 1.0;
  Eigen::VectorXd x_star;
  Eigen::MatrixXd z_star;  // I x J
  Eigen::VectorXd ell;
};

/// Allocation from the tree solve alone (rho fixed to 1). Exposed for tests.
Eigen::MatrixXd tree_solve_allocation(const Network& net);

/// Allocation and utilization from the dense simplex on the full LP.
struct LpPlan {
  Eigen::MatrixXd xi;
  double rho = 0.0;
};
LpPlan simplex_allocation(const Network& net);

StaticPlan solve_static_plan(const Network& net);

Eigen::VectorXd compute_ell(const Network& net, const StaticPlan& plan);

}  // namespace hwctrl
