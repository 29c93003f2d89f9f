#pragma once

#include <Eigen/Dense>

namespace hwctrl {

enum class LpStatus { Optimal, Infeasible, Unbounded };

struct LpResult {
  LpStatus status = LpStatus::Infeasible;
  Eigen::VectorXd x;
  double objective = 0.0;
};

/// min c'x  s.t.  A x = b, x >= 0.  Dense two-phase tableau simplex with Bland's rule.
LpResult solve_lp(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const Eigen::VectorXd& c,
                  double tol = 1e-11);

}  // namespace hwctrl
