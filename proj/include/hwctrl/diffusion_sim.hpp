#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <vector>

#include "hwctrl/costs.hpp"
#include "hwctrl/drift_form.hpp"
#include "hwctrl/grid.hpp"
#include "hwctrl/stats.hpp"

namespace hwctrl {

struct SimConfig {
  double dt = 0.01;
  double horizon = 1000.0;
  double burn_in = -1.0;  // negative: 10% of the horizon
  int batches = 30;
  unsigned long long seed = 1;
  unsigned long long replication = 0;
  Eigen::VectorXd x0;  // empty: origin

  double effective_burn_in() const { return burn_in < 0.0 ? 0.1 * horizon : burn_in; }
};

void validate(const SimConfig& cfg);

/// Called once per step with the state at the start of the step and the control applied.
using StepObserver = std::function<void(long step, double t, const Eigen::VectorXd& x, const ControlPoint& u)>;

/// Euler-Maruyama X_{k+1} = X_k + b(X_k, u(X_k)) dt + Sigma sqrt(dt) N(0, I).
/// Returns the state at the horizon.
Eigen::VectorXd simulate_path(const DriftForm& form, const MarkovControl& ctrl, const SimConfig& cfg,
                              const StepObserver& observe);

/// States at the given times (sorted, within the horizon of cfg is not required).
std::vector<Eigen::VectorXd> simulate_snapshots(const DriftForm& form, const MarkovControl& ctrl,
                                                const SimConfig& cfg, const std::vector<double>& times);

/// Post-burn-in time average of f with batch-means confidence interval.
Estimate estimate_time_average(const DriftForm& form, const MarkovControl& ctrl, const SimConfig& cfg,
                               const std::function<double(const Eigen::VectorXd&, const ControlPoint&)>& f);

struct ErgodicEstimate {
  double mean = 0.0;
  double half_width = 0.0;
  std::vector<Estimate> per_constraint;  // J[r_j] for each pool
};

ErgodicEstimate estimate_ergodic_cost(const DriftForm& form, const MarkovControl& ctrl, const CostSpec& spec,
                                      const std::optional<ConstraintSpec>& cons, const SimConfig& cfg);

/// Same with an arbitrary separable stage cost; idleness terms use exponent m.
ErgodicEstimate estimate_ergodic_cost(const DriftForm& form, const MarkovControl& ctrl, const StageCost& cost,
                                      double m, bool with_constraints, const SimConfig& cfg);

}  // namespace hwctrl
