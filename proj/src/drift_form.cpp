#include "hwctrl/drift_form.hpp"

#include <cmath>
#include <random>

#include "hwctrl/error.hpp"

namespace hwctrl {

Eigen::VectorXd drift(const Network& net, const StaticPlan& plan, const EliminationResult& elim,
                      const Eigen::VectorXd& x, const ControlPoint& u) {
  Eigen::MatrixXd g = ghat(net, elim, x, u);
  return -net.mu.cwiseProduct(g).rowwise().sum() - pos(x.sum()) * net.gamma.cwiseProduct(u.uc) + plan.ell;
}

Eigen::VectorXd drift(const Network& net, const StaticPlan& plan, const Eigen::VectorXd& x, const ControlPoint& u) {
  return drift(net, plan, eliminate(net), x, u);
}

Eigen::VectorXd drift(const DriftForm& form, const Eigen::VectorXd& x, const ControlPoint& u) {
  double s = x.sum();
  return -form.B1 * (x - pos(s) * u.uc) + neg(s) * (form.B2 * u.us) - pos(s) * form.gamma.cwiseProduct(u.uc) +
         form.ell;
}

void drift_matrices(const Network& net, const EliminationResult& elim, Eigen::MatrixXd& B1, Eigen::MatrixXd& B2) {
  B1 = Eigen::MatrixXd::Zero(net.I, net.I);
  B2 = Eigen::MatrixXd::Zero(net.I, net.J);
  for (int e = 0; e < net.num_edges(); ++e) {
    const Edge& ed = net.edges[e];
    double m = net.mu(ed.cls, ed.pool);
    B1.row(ed.cls) += m * elim.A.row(e).cast<double>();
    B2.row(ed.cls) += m * elim.Bc.row(e).cast<double>();
  }
}

DriftForm extract_drift_form(const Network& net, const StaticPlan& plan) {
  EliminationResult elim = eliminate(net);
  DriftForm form;
  drift_matrices(net, elim, form.B1, form.B2);
  form.gamma = net.gamma;
  form.ell = plan.ell;
  form.sigma = (2.0 * net.lambda).cwiseSqrt();
  form.perm = elim.order;

  const int I = net.I, J = net.J;
  for (int r = 0; r < I; ++r) {
    int i = form.perm[r];
    if (!(form.B1(i, i) > 0.0))
      throw Error(ErrorCode::InconsistentAffineForm, "non-positive diagonal in B1 at class " + std::to_string(i + 1));
    for (int c = r + 1; c < I; ++c) {
      if (form.B1(i, form.perm[c]) != 0.0)
        throw Error(ErrorCode::InconsistentAffineForm, "B1 is not lower-triangular in elimination order");
    }
  }

  // Probe both linear regions at random states and controls.
  std::mt19937_64 rng(0x5eedULL);
  std::normal_distribution<double> normal;
  std::exponential_distribution<double> expo;
  for (int probe = 0; probe < 64; ++probe) {
    Eigen::VectorXd x(I);
    for (int i = 0; i < I; ++i) x(i) = 3.0 * normal(rng);
    ControlPoint u{Eigen::VectorXd(I), Eigen::VectorXd(J)};
    for (int i = 0; i < I; ++i) u.uc(i) = expo(rng);
    for (int j = 0; j < J; ++j) u.us(j) = expo(rng);
    u.uc /= u.uc.sum();
    u.us /= u.us.sum();
    Eigen::VectorXd direct = drift(net, plan, elim, x, u);
    Eigen::VectorXd affine = drift(form, x, u);
    double scale = std::max(1.0, direct.cwiseAbs().maxCoeff());
    if ((direct - affine).cwiseAbs().maxCoeff() > 1e-8 * scale)
      throw Error(ErrorCode::InconsistentAffineForm, "affine reconstruction disagrees with the G-map drift");
  }
  return form;
}

}  // namespace hwctrl
