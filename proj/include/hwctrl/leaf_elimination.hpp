#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "hwctrl/control.hpp"
#include "hwctrl/network.hpp"

namespace hwctrl {

enum class LeafOrder { SmallestIndex, LargestIndex };

struct EliminationOptions {
  LeafOrder order = LeafOrder::SmallestIndex;
  std::optional<int> keep_last;  // 0-based class to be eliminated last
};

/// psi_e = A.row(e) * alpha + Bc.row(e) * beta for edge e = net.edges[e].
/// Coefficients are integers (each psi is a signed subtree sum), so storage is exact.
struct EliminationResult {
  std::vector<int> order;  // order[k] = class removed at customer step k
  std::vector<int> pi;     // pi[i] = step at which class i was removed
  std::vector<int> j_of;   // pool attached to class i when it was removed
  Eigen::MatrixXi A;       // E x I
  Eigen::MatrixXi Bc;      // E x J
};

EliminationResult eliminate(const Network& net, const EliminationOptions& opts = {});

/// Evaluates the stored affine forms; no domain check.
Eigen::MatrixXd evaluate_psi(const Network& net, const EliminationResult& elim, const Eigen::VectorXd& alpha,
                             const Eigen::VectorXd& beta);

/// The unique Psi with row sums alpha, column sums beta, supported on the edges.
Eigen::MatrixXd solve_gmap(const Network& net, const EliminationResult& elim, const Eigen::VectorXd& alpha,
                           const Eigen::VectorXd& beta);
Eigen::MatrixXd solve_gmap(const Network& net, const Eigen::VectorXd& alpha, const Eigen::VectorXd& beta);

/// G(x - (e.x)^+ u^c, -(e.x)^- u^s).
Eigen::MatrixXd ghat(const Network& net, const EliminationResult& elim, const Eigen::VectorXd& x,
                     const ControlPoint& u);
Eigen::MatrixXd ghat(const Network& net, const Eigen::VectorXd& x, const ControlPoint& u);

inline double pos(double v) { return v > 0.0 ? v : 0.0; }
inline double neg(double v) { return v < 0.0 ? -v : 0.0; }

}  // namespace hwctrl
