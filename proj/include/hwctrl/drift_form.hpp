#pragma once

#include <Eigen/Dense>
#include <vector>

#include "hwctrl/control.hpp"
#include "hwctrl/leaf_elimination.hpp"
#include "hwctrl/network.hpp"
#include "hwctrl/static_plan.hpp"

namespace hwctrl {

/// b(x,u) = -B1 (x - (e.x)^+ u^c) + (e.x)^- B2 u^s - (e.x)^+ Gamma u^c + ell,  dX = b dt + Sigma dW.
struct DriftForm {
  Eigen::MatrixXd B1;
  Eigen::MatrixXd B2;
  Eigen::VectorXd gamma;
  Eigen::VectorXd ell;
  Eigen::VectorXd sigma;  // diagonal of Sigma
  std::vector<int> perm;  // perm[k] = class in position k; B1 is lower-triangular in this order

  int I() const { return static_cast<int>(B1.rows()); }
  int J() const { return static_cast<int>(B2.cols()); }
  Eigen::MatrixXd Gamma() const { return gamma.asDiagonal(); }
  Eigen::MatrixXd Sigma() const { return sigma.asDiagonal(); }
  /// Diagonal of Sigma Sigma^T.
  Eigen::VectorXd a() const { return sigma.array().square(); }
};

/// Direct drift through the G-map.
Eigen::VectorXd drift(const Network& net, const StaticPlan& plan, const EliminationResult& elim,
                      const Eigen::VectorXd& x, const ControlPoint& u);
Eigen::VectorXd drift(const Network& net, const StaticPlan& plan, const Eigen::VectorXd& x, const ControlPoint& u);

/// Drift through the affine pieces.
Eigen::VectorXd drift(const DriftForm& form, const Eigen::VectorXd& x, const ControlPoint& u);

DriftForm extract_drift_form(const Network& net, const StaticPlan& plan);

/// Rates B1, B2 from an elimination result, before any checks.
void drift_matrices(const Network& net, const EliminationResult& elim, Eigen::MatrixXd& B1, Eigen::MatrixXd& B2);

}  // namespace hwctrl
