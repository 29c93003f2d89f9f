#pragma once

#include <Eigen/Dense>

namespace hwctrl {

/// A point of the action set: u^c on the class simplex, u^s on the pool simplex.
struct ControlPoint {
  Eigen::VectorXd uc;
  Eigen::VectorXd us;

  static ControlPoint vertex(int I, int J, int i, int j) {
    ControlPoint u{Eigen::VectorXd::Zero(I), Eigen::VectorXd::Zero(J)};
    u.uc(i) = 1.0;
    u.us(j) = 1.0;
    return u;
  }
};

inline bool on_simplex(const Eigen::VectorXd& v, double tol = 1e-9) {
  return v.size() > 0 && v.minCoeff() >= -tol && std::abs(v.sum() - 1.0) <= tol;
}

inline bool is_valid(const ControlPoint& u, int I, int J, double tol = 1e-9) {
  return u.uc.size() == I && u.us.size() == J && on_simplex(u.uc, tol) && on_simplex(u.us, tol);
}

/// Throws InvalidInput unless u lies in the action set.
void require_valid(const ControlPoint& u, int I, int J);

}  // namespace hwctrl
