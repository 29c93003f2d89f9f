#include "hwctrl/costs.hpp"

#include <cmath>

#include "hwctrl/error.hpp"
#include "hwctrl/leaf_elimination.hpp"

namespace hwctrl {

void validate_cost(const CostSpec& spec, int I, int J) {
  if (spec.q_weights.size() != I || spec.i_weights.size() != J)
    throw Error(ErrorCode::ShapeMismatch, "cost weights must have lengths I and J");
  if (!(spec.q_weights.array() > 0.0).all()) throw Error(ErrorCode::InvalidInput, "queue weights must be > 0");
  if (!(spec.i_weights.array() >= 0.0).all()) throw Error(ErrorCode::InvalidInput, "idleness weights must be >= 0");
  if (!(spec.m >= 1.0)) throw Error(ErrorCode::InvalidInput, "cost exponent m must be >= 1");
}

void validate_constraints(const ConstraintSpec& cons, int J) {
  if (cons.delta.size() != J) throw Error(ErrorCode::ShapeMismatch, "delta must have length J");
  if (!(cons.delta.array() > 0.0).all()) throw Error(ErrorCode::InvalidInput, "idleness budgets must be > 0");
  if (cons.theta) {
    const Eigen::VectorXd& t = *cons.theta;
    if (t.size() != J) throw Error(ErrorCode::ShapeMismatch, "theta must have length J");
    if (!(t.array() > 0.0).all() || std::abs(t.sum() - 1.0) > 1e-9)
      throw Error(ErrorCode::InvalidInput, "theta must be an interior point of the simplex");
  }
}

namespace {

double weighted_power(const Eigen::VectorXd& w, const Eigen::VectorXd& u, double m) {
  if (m == 1.0) return w.dot(u);
  return w.dot(u.array().pow(m).matrix());
}

}  // namespace

double running_cost(const CostSpec& spec, const Eigen::VectorXd& x, const ControlPoint& u) {
  return stage_cost(spec)(x, u);
}

double idleness_cost(int j, double m, const Eigen::VectorXd& x, const ControlPoint& u) {
  return std::pow(neg(x.sum()) * u.us(j), m);
}

double lagrangian(const CostSpec& spec, const ConstraintSpec& cons, const Multipliers& mult, const Eigen::VectorXd& x,
                  const ControlPoint& u) {
  double g = running_cost(spec, x, u);
  for (int j = 0; j < cons.delta.size(); ++j) g += mult.lam(j) * (idleness_cost(j, spec.m, x, u) - cons.delta(j));
  return g;
}

double StageCost::operator()(double s, const ControlPoint& u) const {
  double c = constant;
  if (s > 0.0) c += std::pow(s, m) * weighted_power(qw, u.uc, m);
  if (s < 0.0) c += std::pow(-s, p) * weighted_power(iw, u.us, p);
  return c;
}

double StageCost::operator()(const Eigen::VectorXd& x, const ControlPoint& u) const { return (*this)(x.sum(), u); }

StageCost stage_cost(const CostSpec& spec) { return {spec.q_weights, spec.i_weights, spec.m, spec.m, 0.0}; }

StageCost lagrangian_stage_cost(const CostSpec& spec, const ConstraintSpec& cons, const Multipliers& mult) {
  return {spec.q_weights, spec.i_weights + mult.lam, spec.m, spec.m, -mult.lam.dot(cons.delta)};
}

StageCost fair_stage_cost(const CostSpec& spec, const Eigen::VectorXd& theta, const Eigen::VectorXd& lam) {
  const int J = static_cast<int>(theta.size());
  Eigen::VectorXd w = Eigen::VectorXd::Zero(J);
  double split = 0.0;
  for (int j = 0; j + 1 < J; ++j) {
    w(j) += lam(j);
    split += lam(j) * theta(j);
  }
  w.array() -= split;
  w += spec.i_weights;
  return {spec.q_weights, w, spec.m, spec.m, 0.0};
}

}  // namespace hwctrl
