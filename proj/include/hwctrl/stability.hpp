#pragma once

#include <Eigen/Dense>
#include <vector>

#include "hwctrl/control.hpp"
#include "hwctrl/drift_form.hpp"
#include "hwctrl/network.hpp"
#include "hwctrl/static_plan.hpp"

namespace hwctrl {

struct StabilityCertificate {
  ControlPoint u_bar;
  Eigen::VectorXd q;  // diagonal of Q
  double m = 2.0;
  double kappa0 = 0.0;
  double kappa1 = 0.0;
  double c_min = 0.0;

  Eigen::MatrixXd Q() const { return q.asDiagonal(); }
};

struct ConeSpec {
  double delta = 0.1;
  bool two_sided = true;
};

ControlPoint stabilizing_control(const Network& net);

struct LyapunovQ {
  Eigen::VectorXd q;
  double c_min = 0.0;
};

/// Diagonal Q with lambda_min(Q B + B^T Q) = 8 for every B in Bs. All matrices must be
/// lower-triangular with positive diagonal under one common ordering of the indices.
LyapunovQ find_lyapunov_Q(const std::vector<Eigen::MatrixXd>& Bs);
LyapunovQ find_lyapunov_Q(const Eigen::MatrixXd& B1);

/// Same, without the final normalization (c_min as produced by the recursion).
LyapunovQ find_lyapunov_Q_unscaled(const std::vector<Eigen::MatrixXd>& Bs);

/// lambda_min(Q B + B^T Q).
double symmetric_part_min_eig(const Eigen::VectorXd& q, const Eigen::MatrixXd& B);

/// V(x) = phi(x'Qx) with phi(s) = s^{m/2} for m >= 2 and s (1+s)^{m/2-1} below.
double lyapunov_value(const Eigen::VectorXd& q, double m, const Eigen::VectorXd& x);

/// Generator of the diffusion applied to V at x under u.
double generator_of_V(const DriftForm& form, const Eigen::VectorXd& q, double m, const Eigen::VectorXd& x,
                      const ControlPoint& u);

/// Deterministic, well-spread unit directions in R^dim (low-discrepancy points pushed through Box-Muller).
std::vector<Eigen::VectorXd> sphere_directions(int dim, int count);

struct DriftViolation {
  Eigen::VectorXd x;
  double lhs = 0.0;  // L V(x)
  double rhs = 0.0;  // kappa0 - kappa1 V(x)
};

struct GeometricDriftReport {
  double kappa0 = 0.0;
  double kappa1 = 0.0;
  int samples = 0;
  std::vector<DriftViolation> violations;
};

GeometricDriftReport verify_geometric_drift(const DriftForm& form, const StabilityCertificate& cert,
                                            const std::vector<double>& radii, int samples_per_radius);

/// Stabilizing control, Q and fitted drift constants for moment exponent m.
StabilityCertificate build_certificate(const Network& net, const DriftForm& form, double m,
                                       const std::vector<double>& radii = {1.0, 10.0, 100.0, 1000.0},
                                       int samples_per_radius = 1024);

struct HypothesisAReport {
  ConeSpec cone;
  Eigen::VectorXd q;
  double C4 = 0.0;   // L V <= 1 - C4 |x|^m outside the cone (V rescaled)
  double C5 = 0.0;   // L V <= 1 + C5 |e.x|^m inside the cone
  double asymptotic_rate = 0.0;  // min over unit out-of-cone directions and controls of -principal part
  bool vacuous = false;          // no point outside the cone
  bool success = false;
};

HypothesisAReport verify_hypothesis_A(const Network& net, const StaticPlan& plan, const ConeSpec& cone, double m,
                                      int samples);

/// Runs verify_hypothesis_A down the delta grid {0.5, 0.2, 0.1, 0.05, 0.02, 0.01} and
/// returns the first success.
HypothesisAReport scan_cone(const Network& net, const StaticPlan& plan, bool two_sided, double m, int samples);

const std::vector<double>& cone_delta_grid();

}  // namespace hwctrl
