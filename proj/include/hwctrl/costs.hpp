#pragma once

#include <Eigen/Dense>
#include <optional>

#include "hwctrl/control.hpp"

namespace hwctrl {

struct CostSpec {
  Eigen::VectorXd q_weights;  // xi, length I
  Eigen::VectorXd i_weights;  // zeta, length J
  double m = 1.0;
};

struct ConstraintSpec {
  Eigen::VectorXd delta;                // length J
  std::optional<Eigen::VectorXd> theta; // interior point of the J-simplex
};

struct Multipliers {
  Eigen::VectorXd lam;
};

void validate_cost(const CostSpec& spec, int I, int J);
void validate_constraints(const ConstraintSpec& cons, int J);

double running_cost(const CostSpec& spec, const Eigen::VectorXd& x, const ControlPoint& u);

/// [(e.x)^- u^s_j]^m for pool j (0-based).
double idleness_cost(int j, double m, const Eigen::VectorXd& x, const ControlPoint& u);

/// r0 + sum_j lam_j (r_j - delta_j).
double lagrangian(const CostSpec& spec, const ConstraintSpec& cons, const Multipliers& mult, const Eigen::VectorXd& x,
                  const ControlPoint& u);

/// Separable running cost
///   [(e.x)^+]^m  sum_i qw_i (u^c_i)^m  +  [(e.x)^-]^p  sum_j iw_j (u^s_j)^p  +  constant.
/// Every cost the solvers handle reduces to this shape.
struct StageCost {
  Eigen::VectorXd qw;
  Eigen::VectorXd iw;
  double m = 1.0;
  double p = 1.0;
  double constant = 0.0;

  double operator()(const Eigen::VectorXd& x, const ControlPoint& u) const;
  double operator()(double s, const ControlPoint& u) const;
};

StageCost stage_cost(const CostSpec& spec);

/// Lagrangian of the idleness-constrained problem with queue-only r0.
StageCost lagrangian_stage_cost(const CostSpec& spec, const ConstraintSpec& cons, const Multipliers& mult);

/// Stage cost whose average is  J[r_0] + sum_{j<J} lam_j (J[r_j] - theta_j sum_k J[r_k]).
StageCost fair_stage_cost(const CostSpec& spec, const Eigen::VectorXd& theta, const Eigen::VectorXd& lam);

}  // namespace hwctrl
