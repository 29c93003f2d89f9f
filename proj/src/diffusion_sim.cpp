#include "hwctrl/diffusion_sim.hpp"

#include <cmath>
#include <random>
#include <string>

#include "hwctrl/error.hpp"
#include "hwctrl/leaf_elimination.hpp"

namespace hwctrl {

void validate(const SimConfig& cfg) {
  if (!(cfg.dt > 0.0)) throw Error(ErrorCode::InvalidInput, "dt must be > 0");
  if (!(cfg.horizon > 0.0)) throw Error(ErrorCode::InvalidInput, "horizon must be > 0");
  if (!(cfg.effective_burn_in() < cfg.horizon)) throw Error(ErrorCode::InvalidInput, "burn-in must be below the horizon");
  if (cfg.batches < 10) throw Error(ErrorCode::InvalidInput, "need at least 10 batches");
}

namespace {

// Allocation-free drift evaluation for the hot loop.
class DriftKernel {
 public:
  explicit DriftKernel(const DriftForm& f) : f_(f), tmp_(f.I()), b_(f.I()), side_(f.I()) {}

  const Eigen::VectorXd& operator()(const Eigen::VectorXd& x, const ControlPoint& u) {
    const double s = x.sum();
    const double sp = pos(s), sn = neg(s);
    tmp_ = x - sp * u.uc;
    b_.noalias() = f_.B1 * tmp_;
    b_ = -b_;
    if (sn > 0.0) {
      side_.noalias() = f_.B2 * u.us;
      b_ += sn * side_;
    }
    if (sp > 0.0) b_ -= sp * f_.gamma.cwiseProduct(u.uc);
    b_ += f_.ell;
    return b_;
  }

 private:
  const DriftForm& f_;
  Eigen::VectorXd tmp_, b_, side_;
};

std::mt19937_64 make_rng(const SimConfig& cfg) {
  std::seed_seq seq{static_cast<unsigned>(cfg.seed & 0xffffffffu), static_cast<unsigned>(cfg.seed >> 32),
                    static_cast<unsigned>(cfg.replication & 0xffffffffu),
                    static_cast<unsigned>(cfg.replication >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace

Eigen::VectorXd simulate_path(const DriftForm& form, const MarkovControl& ctrl, const SimConfig& cfg,
                              const StepObserver& observe) {
  validate(cfg);
  const int I = form.I();
  Eigen::VectorXd x = cfg.x0.size() ? cfg.x0 : Eigen::VectorXd::Zero(I);
  if (x.size() != I) throw Error(ErrorCode::ShapeMismatch, "initial state has the wrong dimension");

  auto rng = make_rng(cfg);
  std::normal_distribution<double> normal;
  DriftKernel b(form);
  const Eigen::VectorXd scale = form.sigma * std::sqrt(cfg.dt);
  const long steps = std::lround(cfg.horizon / cfg.dt);
  Eigen::VectorXd noise(I);
  for (long k = 0; k < steps; ++k) {
    const ControlPoint& u = ctrl(x);
    if (observe) observe(k, k * cfg.dt, x, u);
    for (int i = 0; i < I; ++i) noise(i) = normal(rng);
    x += b(x, u) * cfg.dt + scale.cwiseProduct(noise);
    if (!(x.cwiseAbs().maxCoeff() <= 1e9))
      throw Error(ErrorCode::NumericalBlowup, "|X| exceeded 1e9 at step " + std::to_string(k + 1));
  }
  return x;
}

std::vector<Eigen::VectorXd> simulate_snapshots(const DriftForm& form, const MarkovControl& ctrl,
                                                const SimConfig& cfg, const std::vector<double>& times) {
  std::vector<long> at;
  for (double t : times) at.push_back(std::lround(t / cfg.dt));
  std::vector<Eigen::VectorXd> out(times.size());
  SimConfig run = cfg;
  run.horizon = times.empty() ? cfg.dt : (at.back() + 1) * cfg.dt;
  run.burn_in = 0.0;
  std::size_t next = 0;
  simulate_path(form, ctrl, run, [&](long step, double, const Eigen::VectorXd& x, const ControlPoint&) {
    while (next < at.size() && at[next] == step) out[next++] = x;
  });
  return out;
}

Estimate estimate_time_average(const DriftForm& form, const MarkovControl& ctrl, const SimConfig& cfg,
                               const std::function<double(const Eigen::VectorXd&, const ControlPoint&)>& f) {
  validate(cfg);
  const long steps = std::lround(cfg.horizon / cfg.dt);
  const long first = std::lround(cfg.effective_burn_in() / cfg.dt);
  const long per_batch = (steps - first) / cfg.batches;
  if (per_batch < 1) throw Error(ErrorCode::InvalidInput, "horizon too short for the batch count");
  std::vector<double> sums(cfg.batches, 0.0);
  simulate_path(form, ctrl, cfg, [&](long step, double, const Eigen::VectorXd& x, const ControlPoint& u) {
    if (step < first) return;
    long batch = (step - first) / per_batch;
    if (batch < cfg.batches) sums[batch] += f(x, u);
  });
  for (double& s : sums) s /= per_batch;
  return mean_ci(sums);
}

ErgodicEstimate estimate_ergodic_cost(const DriftForm& form, const MarkovControl& ctrl, const StageCost& cost,
                                      double m, bool with_constraints, const SimConfig& cfg) {
  validate(cfg);
  const int J = form.J();
  const int terms = 1 + (with_constraints ? J : 0);
  const long steps = std::lround(cfg.horizon / cfg.dt);
  const long first = std::lround(cfg.effective_burn_in() / cfg.dt);
  const long per_batch = (steps - first) / cfg.batches;
  if (per_batch < 1) throw Error(ErrorCode::InvalidInput, "horizon too short for the batch count");
  std::vector<std::vector<double>> sums(terms, std::vector<double>(cfg.batches, 0.0));
  simulate_path(form, ctrl, cfg, [&](long step, double, const Eigen::VectorXd& x, const ControlPoint& u) {
    if (step < first) return;
    long batch = (step - first) / per_batch;
    if (batch >= cfg.batches) return;
    const double s = x.sum();
    sums[0][batch] += cost(s, u);
    if (with_constraints && s < 0.0)
      for (int j = 0; j < J; ++j) sums[1 + j][batch] += std::pow(-s * u.us(j), m);
  });
  ErgodicEstimate out;
  for (auto& v : sums)
    for (double& s : v) s /= per_batch;
  Estimate total = mean_ci(sums[0]);
  out.mean = total.mean;
  out.half_width = total.half_width;
  for (int j = 1; j < terms; ++j) out.per_constraint.push_back(mean_ci(sums[j]));
  return out;
}

ErgodicEstimate estimate_ergodic_cost(const DriftForm& form, const MarkovControl& ctrl, const CostSpec& spec,
                                      const std::optional<ConstraintSpec>& cons, const SimConfig& cfg) {
  return estimate_ergodic_cost(form, ctrl, stage_cost(spec), spec.m, cons.has_value(), cfg);
}

}  // namespace hwctrl
