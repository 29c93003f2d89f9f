#include "hwctrl/simplex.hpp"

#include <limits>
#include <vector>

namespace hwctrl {

namespace {

// Tableau T is (m+1) x (ncols+1); last row is the reduced-cost row, last column the rhs.
// Returns false if unbounded.
bool run_simplex(Eigen::MatrixXd& T, std::vector<int>& basis, int allowed_cols, double tol) {
  const int m = static_cast<int>(basis.size());
  const int rhs = static_cast<int>(T.cols()) - 1;
  for (int iter = 0; iter < 50000; ++iter) {
    int enter = -1;
    for (int j = 0; j < allowed_cols; ++j) {
      if (T(m, j) < -tol) {
        enter = j;
        break;
      }
    }
    if (enter < 0) return true;

    int leave = -1;
    double best = std::numeric_limits<double>::infinity();
    for (int r = 0; r < m; ++r) {
      if (T(r, enter) > tol) {
        double ratio = T(r, rhs) / T(r, enter);
        if (leave < 0 || ratio < best - tol) {
          best = ratio;
          leave = r;
        } else if (ratio <= best + tol && basis[r] < basis[leave]) {
          leave = r;
        }
      }
    }
    if (leave < 0) return false;

    T.row(leave) /= T(leave, enter);
    for (int r = 0; r <= m; ++r) {
      if (r != leave && T(r, enter) != 0.0) T.row(r) -= T(r, enter) * T.row(leave);
    }
    basis[leave] = enter;
  }
  return true;
}

}  // namespace

LpResult solve_lp(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const Eigen::VectorXd& c, double tol) {
  const int m = static_cast<int>(A.rows());
  const int n = static_cast<int>(A.cols());
  const int rhs = n + m;

  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(m + 1, n + m + 1);
  for (int r = 0; r < m; ++r) {
    double sign = b(r) < 0.0 ? -1.0 : 1.0;
    T.row(r).head(n) = sign * A.row(r);
    T(r, n + r) = 1.0;
    T(r, rhs) = sign * b(r);
  }
  std::vector<int> basis(m);
  for (int r = 0; r < m; ++r) basis[r] = n + r;

  // Phase 1: minimize the sum of artificials.
  for (int r = 0; r < m; ++r) T.row(m) -= T.row(r);
  for (int r = 0; r < m; ++r) T(m, n + r) = 0.0;
  run_simplex(T, basis, n + m, tol);

  LpResult out;
  if (-T(m, rhs) > 1e-9 * std::max(1.0, b.cwiseAbs().maxCoeff())) return out;

  // Drive remaining artificials out of the basis where possible.
  for (int r = 0; r < m; ++r) {
    if (basis[r] < n) continue;
    for (int j = 0; j < n; ++j) {
      if (std::abs(T(r, j)) > tol) {
        T.row(r) /= T(r, j);
        for (int k = 0; k <= m; ++k)
          if (k != r && T(k, j) != 0.0) T.row(k) -= T(k, j) * T.row(r);
        basis[r] = j;
        break;
      }
    }
  }

  // Phase 2.
  T.row(m).setZero();
  T.row(m).head(n) = c.transpose();
  for (int r = 0; r < m; ++r) {
    if (basis[r] < n && c(basis[r]) != 0.0) T.row(m) -= c(basis[r]) * T.row(r);
  }
  if (!run_simplex(T, basis, n, tol)) {
    out.status = LpStatus::Unbounded;
    return out;
  }

  out.status = LpStatus::Optimal;
  out.x = Eigen::VectorXd::Zero(n);
  for (int r = 0; r < m; ++r)
    if (basis[r] < n) out.x(basis[r]) = T(r, rhs);
  out.objective = c.dot(out.x);
  return out;
}

}  // namespace hwctrl
