#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <memory>
#include <optional>
#include <vector>

#include "hwctrl/costs.hpp"
#include "hwctrl/drift_form.hpp"
#include "hwctrl/grid.hpp"

namespace hwctrl {

/// Hybrid: central differences for the drift wherever the diffusion keeps both rates nonnegative,
/// upwind elsewhere. Upwind: one-sided drift everywhere.
enum class Scheme { Hybrid, Upwind };

/// Column k holds (u^c, u^s) at grid node k.
using Policy = Eigen::MatrixXd;
using CRef = Eigen::Ref<const Eigen::VectorXd>;

/// Markov-chain approximation of the controlled generator on a box grid. The boundary ring is
/// pinned to the fallback control and its outward rates are dropped, so no mass leaves the box.
class ControlledChain {
 public:
  ControlledChain(const DriftForm& form, const StageCost& cost, const GridSpec& spec, Scheme scheme = Scheme::Hybrid);

  const Grid& grid() const { return grid_; }
  const ControlPoint& fallback() const { return fallback_; }
  const StageCost& stage_cost() const { return cost_; }
  int I() const { return I_; }
  int J() const { return J_; }
  long size() const { return grid_.size(); }
  double sum_at(long node) const { return sum_(node); }

  /// Neighbour rates along each axis for control u at node.
  void rates(long node, CRef uc, CRef us, Eigen::VectorXd& up, Eigen::VectorXd& down) const;
  double cost(long node, CRef uc, CRef us) const;

  Policy constant_policy(const ControlPoint& u) const;
  Eigen::SparseMatrix<double> generator(const Policy& p) const;
  Eigen::VectorXd cost_vector(const Policy& p) const;
  Eigen::VectorXd cost_vector(const Policy& p, const StageCost& c) const;
  /// [(e.x)^- u^s_j]^m at every node.
  Eigen::VectorXd idleness_vector(const Policy& p, int j, double m) const;

  /// cost + sum of rates times value differences, for control u at node.
  double hamiltonian(long node, CRef uc, CRef us, const Eigen::VectorXd& V) const;
  /// Central-difference gradient of V at an interior node.
  void gradient(long node, const Eigen::VectorXd& V, double* out) const;
  const Eigen::MatrixXd& control_matrix_c() const { return Mc_; }
  const Eigen::MatrixXd& control_matrix_s() const { return Ms_; }

  void set_cost(const StageCost& c) { cost_ = c; }

 private:
  Grid grid_;
  ControlPoint fallback_;
  StageCost cost_;
  Scheme scheme_;
  int I_, J_;
  Eigen::MatrixXd Mc_, Ms_;
  Eigen::MatrixXd base_;        // -B1 x + ell at every node
  Eigen::VectorXd diff_;        // a / (2 h^2)
  Eigen::VectorXd sum_;

  template <class F>
  void for_each_rate(long node, CRef uc, CRef us, F&& f) const;
};

/// Factorized Poisson equation of one policy, with the value at the origin pinned to zero.
class PolicyEvaluator {
 public:
  PolicyEvaluator(const ControlledChain& chain, const Policy& p);
  /// Stationary average of f.
  double average(const Eigen::VectorXd& f) const;
  /// Relative value of f given its average (zero at the origin).
  Eigen::VectorXd relative_value(const Eigen::VectorXd& f, double avg) const;

 private:
  struct Impl;
  std::shared_ptr<Impl> impl_;
};

struct HjbOptions {
  Scheme scheme = Scheme::Hybrid;
  int max_iterations = 200;
  double tol = 1e-9;
  std::optional<Eigen::VectorXd> initial_V;  // start from the policy greedy in this V
  std::optional<Policy> initial_policy;
  int threads = 0;
  int gradient_steps = 50;
  int max_dual_steps = 80;
};

struct HjbSolution {
  Grid grid;
  Eigen::VectorXd V;
  double rho = 0.0;
  Policy policy;
  ControlPoint fallback;
  Multipliers multipliers;
  Eigen::VectorXd constraint_values;  // stationary J[r_j] per pool
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> rho_history;
};

struct DiscountedSolution {
  Grid grid;
  Eigen::VectorXd V;
  Policy policy;
  int iterations = 0;
  bool converged = false;
};

/// Stationary average cost and relative value of a fixed policy on the chain.
struct PolicyValue {
  double rho = 0.0;
  Eigen::VectorXd V;
};
PolicyValue evaluate_policy(const ControlledChain& chain, const Policy& p);

HjbSolution solve_ergodic(const DriftForm& form, const StageCost& cost, const GridSpec& grid,
                          const HjbOptions& opts = {});
HjbSolution solve_ergodic(const DriftForm& form, const CostSpec& cost, const GridSpec& grid,
                          const HjbOptions& opts = {});

DiscountedSolution solve_discounted(const DriftForm& form, const StageCost& cost, const GridSpec& grid, double alpha,
                                    const HjbOptions& opts = {});

HjbSolution solve_constrained(const DriftForm& form, const CostSpec& cost, const ConstraintSpec& cons,
                              const GridSpec& grid, const HjbOptions& opts = {});

HjbSolution solve_fair(const DriftForm& form, const CostSpec& cost, const Eigen::VectorXd& theta,
                       const GridSpec& grid, const HjbOptions& opts = {});

/// Feedback map of a solution: grid lookup inside the box, fallback outside.
MarkovControl policy_control(const HjbSolution& sol);

/// Euclidean projection onto the probability simplex.
Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& v);

}  // namespace hwctrl
