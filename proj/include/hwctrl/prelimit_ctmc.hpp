#pragma once

#include <Eigen/Dense>

#include "hwctrl/costs.hpp"
#include "hwctrl/grid.hpp"
#include "hwctrl/leaf_elimination.hpp"
#include "hwctrl/network.hpp"
#include "hwctrl/static_plan.hpp"
#include "hwctrl/stats.hpp"

namespace hwctrl {

struct NthSystem {
  double n = 1.0;
  Eigen::VectorXd lambda_n;
  Eigen::MatrixXd mu_n;  // I x J, zero off edges
  Eigen::VectorXd gamma_n;
  Eigen::VectorXi N_n;
  Eigen::VectorXd rounding;  // N_n - n nu
};

NthSystem build_nth_system(const Network& net, double n);

struct CtmcState {
  Eigen::VectorXi X;
  Eigen::VectorXi Q;
  Eigen::VectorXi Y;
  Eigen::MatrixXi Z;  // I x J
  bool fallback = false;
};

/// Splits a nonnegative integer total in proportion to w, preserving the total exactly.
Eigen::VectorXi apportion(long total, const Eigen::VectorXd& w);

bool balance_holds(const Network& net, const NthSystem& sys, const CtmcState& st);

/// Queue, idleness and service assignment induced by the control at the scaled state.
CtmcState policy_from_control(const Network& net, const NthSystem& sys, const StaticPlan& plan,
                              const EliminationResult& elim, const MarkovControl& ctrl, const Eigen::VectorXi& X);

struct CtmcConfig {
  double horizon = 1000.0;
  double burn_in = -1.0;  // negative: 10% of the horizon
  int batches = 30;
  unsigned long long seed = 1;
  unsigned long long replication = 0;
};

struct CtmcEstimate {
  Estimate cost;                       // scaled running cost of (Q/sqrt n, Y/sqrt n)
  std::vector<Estimate> scaled_queue;  // per class
  std::vector<Estimate> scaled_idle;   // per pool
  Estimate scaled_total;               // e.(X - n x*)/sqrt n
  long events = 0;
  double fallback_fraction = 0.0;      // time share spent under the priority fallback
};

CtmcEstimate simulate_ctmc(const Network& net, const NthSystem& sys, const StaticPlan& plan,
                           const MarkovControl& ctrl, const StageCost& cost, const CtmcConfig& cfg);

/// Stationary law of the single-pool birth-death chain with abandonment (Erlang-A), truncated
/// where the tail mass is negligible. Entry k is P(X = k).
Eigen::VectorXd erlang_a_distribution(double lambda, double mu, double gamma, int servers);

}  // namespace hwctrl
