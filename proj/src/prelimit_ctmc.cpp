#include "hwctrl/prelimit_ctmc.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "hwctrl/error.hpp"

namespace hwctrl {

NthSystem build_nth_system(const Network& net, double n) {
  if (!(n >= 1.0)) throw Error(ErrorCode::InvalidInput, "scale n must be >= 1");
  NthSystem sys;
  sys.n = n;
  const double rn = std::sqrt(n);
  sys.lambda_n = n * net.lambda + rn * net.lambda_hat;
  if (!(sys.lambda_n.array() > 0.0).all()) throw Error(ErrorCode::NonPositiveRate, "scaled arrival rate is not positive");
  sys.mu_n = net.mu + net.mu_hat / rn;
  for (int i = 0; i < net.I; ++i)
    for (int j = 0; j < net.J; ++j)
      if (!net.has_edge(i, j)) sys.mu_n(i, j) = 0.0;
  if ((sys.mu_n.array() < 0.0).any()) throw Error(ErrorCode::NonPositiveRate, "scaled service rate is negative");
  sys.gamma_n = net.gamma;
  sys.N_n.resize(net.J);
  sys.rounding.resize(net.J);
  for (int j = 0; j < net.J; ++j) {
    sys.N_n(j) = std::max(1, static_cast<int>(std::lround(n * net.nu(j))));
    sys.rounding(j) = sys.N_n(j) - n * net.nu(j);
  }
  return sys;
}

Eigen::VectorXi apportion(long total, const Eigen::VectorXd& w) {
  const int k = static_cast<int>(w.size());
  Eigen::VectorXi out = Eigen::VectorXi::Zero(k);
  if (total <= 0) return out;
  double sum = w.sum();
  std::vector<double> frac(k);
  long used = 0;
  for (int a = 0; a < k; ++a) {
    double share = total * w(a) / sum;
    out(a) = static_cast<int>(std::floor(share));
    frac[a] = share - out(a);
    used += out(a);
  }
  std::vector<int> idx(k);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return frac[a] > frac[b]; });
  for (long r = 0; r < total - used; ++r) ++out(idx[r % k]);
  return out;
}

bool balance_holds(const Network& net, const NthSystem& sys, const CtmcState& st) {
  if ((st.Q.array() < 0).any() || (st.Y.array() < 0).any() || (st.Z.array() < 0).any()) return false;
  for (int i = 0; i < net.I; ++i)
    if (st.X(i) != st.Q(i) + st.Z.row(i).sum()) return false;
  for (int j = 0; j < net.J; ++j)
    if (sys.N_n(j) != st.Y(j) + st.Z.col(j).sum()) return false;
  return true;
}

namespace {

void greedy_fill(const Network& net, const NthSystem& sys, const EliminationResult& elim, CtmcState& st) {
  Eigen::VectorXi left = st.X;
  Eigen::VectorXi cap = sys.N_n;
  st.Z.setZero();
  for (int i : elim.order) {
    for (int j = 0; j < net.J; ++j) {
      if (!net.has_edge(i, j)) continue;
      int take = std::min(left(i), cap(j));
      st.Z(i, j) += take;
      left(i) -= take;
      cap(j) -= take;
    }
  }
  st.Q = left;
  st.Y = cap;
  st.fallback = true;
}

}  // namespace

CtmcState policy_from_control(const Network& net, const NthSystem& sys, const StaticPlan& plan,
                              const EliminationResult& elim, const MarkovControl& ctrl, const Eigen::VectorXi& X) {
  CtmcState st;
  st.X = X;
  st.Z = Eigen::MatrixXi::Zero(net.I, net.J);
  const double rn = std::sqrt(sys.n);
  Eigen::VectorXd xhat = (X.cast<double>() - sys.n * plan.x_star) / rn;
  const ControlPoint& u = ctrl(xhat);

  long s = static_cast<long>(X.sum()) - static_cast<long>(sys.N_n.sum());
  st.Q = apportion(std::max(s, 0L), u.uc);
  st.Y = apportion(std::max(-s, 0L), u.us);

  Eigen::VectorXi alpha = X - st.Q;
  Eigen::VectorXi beta = sys.N_n - st.Y;
  Eigen::VectorXi flat = elim.A * alpha + elim.Bc * beta;
  bool ok = true;
  for (int e = 0; e < net.num_edges() && ok; ++e) {
    if (flat(e) < 0) ok = false;
    st.Z(net.edges[e].cls, net.edges[e].pool) = flat(e);
  }
  if (!ok) greedy_fill(net, sys, elim, st);
  return st;
}

CtmcEstimate simulate_ctmc(const Network& net, const NthSystem& sys, const StaticPlan& plan,
                           const MarkovControl& ctrl, const StageCost& cost, const CtmcConfig& cfg) {
  if (!(cfg.horizon > 0.0) || cfg.batches < 10) throw Error(ErrorCode::InvalidInput, "bad simulation settings");
  const double burn = cfg.burn_in < 0.0 ? 0.1 * cfg.horizon : cfg.burn_in;
  if (!(burn < cfg.horizon)) throw Error(ErrorCode::InvalidInput, "burn-in must be below the horizon");
  const int I = net.I, J = net.J, E = net.num_edges();
  const double rn = std::sqrt(sys.n);
  const EliminationResult elim = eliminate(net);

  std::seed_seq seq{static_cast<unsigned>(cfg.seed & 0xffffffffu), static_cast<unsigned>(cfg.seed >> 32),
                    static_cast<unsigned>(cfg.replication & 0xffffffffu),
                    static_cast<unsigned>(cfg.replication >> 32), 0x51u};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  Eigen::VectorXi X(I);
  for (int i = 0; i < I; ++i) X(i) = static_cast<int>(std::lround(sys.n * plan.x_star(i)));
  CtmcState st = policy_from_control(net, sys, plan, elim, ctrl, X);

  const int stats = 1 + I + J + 1;  // cost, queues, idles, total
  const double batch_len = (cfg.horizon - burn) / cfg.batches;
  std::vector<std::vector<double>> acc(stats, std::vector<double>(cfg.batches, 0.0));
  std::vector<double> values(stats);
  double fallback_time = 0.0;
  const double total_fluid = plan.x_star.sum() * sys.n;

  auto observe = [&]() {
    double c = cost.constant;
    for (int i = 0; i < I; ++i) {
      double q = st.Q(i) / rn;
      values[1 + i] = q;
      if (q > 0.0) c += cost.qw(i) * std::pow(q, cost.m);
    }
    for (int j = 0; j < J; ++j) {
      double y = st.Y(j) / rn;
      values[1 + I + j] = y;
      if (y > 0.0) c += cost.iw(j) * std::pow(y, cost.p);
    }
    values[0] = c;
    values[stats - 1] = (st.X.sum() - total_fluid) / rn;
  };
  // Adds the contribution of holding the current values over [t0, t1).
  auto accumulate = [&](double t0, double t1) {
    t0 = std::max(t0, burn);
    while (t0 < t1) {
      int b = static_cast<int>((t0 - burn) / batch_len);
      if (b >= cfg.batches) break;
      double end = std::min(t1, burn + (b + 1) * batch_len);
      for (int k = 0; k < stats; ++k) acc[k][b] += values[k] * (end - t0);
      if (st.fallback) fallback_time += end - t0;
      t0 = end;
    }
  };

  CtmcEstimate out;
  std::vector<double> rates(I + E + I);
  double t = 0.0;
  observe();
  while (t < cfg.horizon) {
    for (int i = 0; i < I; ++i) rates[i] = sys.lambda_n(i);
    for (int e = 0; e < E; ++e) {
      const Edge& ed = net.edges[e];
      rates[I + e] = sys.mu_n(ed.cls, ed.pool) * st.Z(ed.cls, ed.pool);
    }
    for (int i = 0; i < I; ++i) rates[I + E + i] = sys.gamma_n(i) * st.Q(i);
    double total = std::accumulate(rates.begin(), rates.end(), 0.0);
    double dt = -std::log(1.0 - unif(rng)) / total;
    double t_next = std::min(t + dt, cfg.horizon);
    if (t_next > burn) accumulate(t, t_next);
    t = t + dt;
    if (t >= cfg.horizon) break;

    double pick = unif(rng) * total;
    int k = 0;
    while (k + 1 < static_cast<int>(rates.size()) && pick >= rates[k]) pick -= rates[k++];
    while (rates[k] <= 0.0) --k;  // guards against round-off landing on a zero-rate slot
    if (k < I) {
      ++X(k);
    } else if (k < I + E) {
      --X(net.edges[k - I].cls);
    } else {
      --X(k - I - E);
    }
    st = policy_from_control(net, sys, plan, elim, ctrl, X);
    assert(balance_holds(net, sys, st));
    ++out.events;
    observe();
  }

  for (auto& v : acc)
    for (double& s : v) s /= batch_len;
  out.cost = mean_ci(acc[0]);
  for (int i = 0; i < I; ++i) out.scaled_queue.push_back(mean_ci(acc[1 + i]));
  for (int j = 0; j < J; ++j) out.scaled_idle.push_back(mean_ci(acc[1 + I + j]));
  out.scaled_total = mean_ci(acc[stats - 1]);
  out.fallback_fraction = fallback_time / (cfg.horizon - burn);
  return out;
}

Eigen::VectorXd erlang_a_distribution(double lambda, double mu, double gamma, int servers) {
  if (!(gamma > 0.0)) throw Error(ErrorCode::NoAbandonment, "Erlang-A needs a positive abandonment rate");
  std::vector<double> logp{0.0};
  double best = 0.0;
  for (int k = 1;; ++k) {
    double death = std::min(k, servers) * mu + std::max(0, k - servers) * gamma;
    double next = logp.back() + std::log(lambda / death);
    logp.push_back(next);
    best = std::max(best, next);
    if (k > servers && next < best - 60.0) break;
  }
  Eigen::VectorXd p(static_cast<int>(logp.size()));
  for (int k = 0; k < p.size(); ++k) p(k) = std::exp(logp[k] - best);
  return p / p.sum();
}

}  // namespace hwctrl
