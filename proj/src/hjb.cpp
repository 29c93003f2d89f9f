#include "hwctrl/hjb.hpp"

#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "hwctrl/error.hpp"
#include "hwctrl/leaf_elimination.hpp"
#include "hwctrl/parallel.hpp"

namespace hwctrl {

namespace {

double power_sum(const Eigen::VectorXd& w, CRef u, double m) {
  double acc = 0.0;
  for (int k = 0; k < u.size(); ++k) {
    if (w(k) == 0.0 || u(k) <= 0.0) continue;
    acc += w(k) * (m == 1.0 ? u(k) : std::pow(u(k), m));
  }
  return acc;
}

double stage_value(const StageCost& c, double s, CRef uc, CRef us) {
  double v = c.constant;
  if (s > 0.0) v += std::pow(s, c.m) * power_sum(c.qw, uc, c.m);
  if (s < 0.0) v += std::pow(-s, c.p) * power_sum(c.iw, us, c.p);
  return v;
}

}  // namespace

ControlledChain::ControlledChain(const DriftForm& form, const StageCost& cost, const GridSpec& spec, Scheme scheme)
    : fallback_(spec.fallback), cost_(cost), scheme_(scheme), I_(form.I()), J_(form.J()) {
  if (I_ > 4)
    throw Error(ErrorCode::DimensionTooLarge,
                "grid solver supports at most 4 classes; use simulation-based policy search beyond that");
  require_valid(fallback_, I_, J_);
  if (cost.qw.size() != I_ || cost.iw.size() != J_) throw Error(ErrorCode::ShapeMismatch, "cost weights mismatch");
  grid_ = Grid(I_, spec.radius, spec.h);
  Mc_ = form.B1 - form.Gamma();
  Ms_ = form.B2;
  diff_ = form.a() / (2.0 * grid_.h() * grid_.h());
  const long N = grid_.size();
  base_.resize(I_, N);
  sum_.resize(N);
  for (long k = 0; k < N; ++k) {
    long isum = 0;
    Eigen::VectorXd x(I_);
    for (int a = 0; a < I_; ++a) {
      int idx = grid_.axis_index(k, a) - grid_.half();
      isum += idx;
      x(a) = idx * grid_.h();
    }
    sum_(k) = isum * grid_.h();
    base_.col(k) = -form.B1 * x + form.ell;
  }
}

template <class F>
void ControlledChain::for_each_rate(long node, CRef uc, CRef us, F&& f) const {
  const double s = sum_(node);
  const double sp = pos(s), sn = neg(s);
  const double h = grid_.h();
  const int top = 2 * grid_.half();
  for (int i = 0; i < I_; ++i) {
    double b = base_(i, node);
    if (sp > 0.0)
      for (int c = 0; c < I_; ++c) b += sp * Mc_(i, c) * uc(c);
    if (sn > 0.0)
      for (int j = 0; j < J_; ++j) b += sn * Ms_(i, j) * us(j);
    const double d = diff_(i);
    double up, down;
    if (scheme_ == Scheme::Hybrid && std::abs(b) <= 2.0 * d * h) {
      up = d + b / (2.0 * h);
      down = d - b / (2.0 * h);
    } else {
      up = d + pos(b) / h;
      down = d + neg(b) / h;
    }
    const int idx = grid_.axis_index(node, i);
    if (idx == top) up = 0.0;
    if (idx == 0) down = 0.0;
    f(i, up, down);
  }
}

void ControlledChain::rates(long node, CRef uc, CRef us, Eigen::VectorXd& up, Eigen::VectorXd& down) const {
  up.resize(I_);
  down.resize(I_);
  for_each_rate(node, uc, us, [&](int i, double u, double d) {
    up(i) = u;
    down(i) = d;
  });
}

double ControlledChain::cost(long node, CRef uc, CRef us) const { return stage_value(cost_, sum_(node), uc, us); }

double ControlledChain::hamiltonian(long node, CRef uc, CRef us, const Eigen::VectorXd& V) const {
  double H = stage_value(cost_, sum_(node), uc, us);
  const double v0 = V(node);
  for_each_rate(node, uc, us, [&](int i, double up, double down) {
    const long st = grid_.stride(i);
    if (up > 0.0) H += up * (V(node + st) - v0);
    if (down > 0.0) H += down * (V(node - st) - v0);
  });
  return H;
}

void ControlledChain::gradient(long node, const Eigen::VectorXd& V, double* out) const {
  for (int i = 0; i < I_; ++i) {
    const long st = grid_.stride(i);
    out[i] = (V(node + st) - V(node - st)) / (2.0 * grid_.h());
  }
}

Policy ControlledChain::constant_policy(const ControlPoint& u) const {
  Policy p(I_ + J_, grid_.size());
  Eigen::VectorXd col(I_ + J_);
  col << u.uc, u.us;
  p.colwise() = col;
  return p;
}

Eigen::SparseMatrix<double> ControlledChain::generator(const Policy& p) const {
  const long N = grid_.size();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(N * (2 * I_ + 1));
  for (long k = 0; k < N; ++k) {
    double total = 0.0;
    for_each_rate(k, p.col(k).head(I_), p.col(k).tail(J_), [&](int i, double up, double down) {
      const long st = grid_.stride(i);
      const int idx = grid_.axis_index(k, i);
      if (idx < 2 * grid_.half()) trip.emplace_back(k, k + st, up);
      if (idx > 0) trip.emplace_back(k, k - st, down);
      total += up + down;
    });
    trip.emplace_back(k, k, -total);
  }
  Eigen::SparseMatrix<double> L(N, N);
  L.setFromTriplets(trip.begin(), trip.end());
  return L;
}

Eigen::VectorXd ControlledChain::cost_vector(const Policy& p, const StageCost& c) const {
  Eigen::VectorXd out(grid_.size());
  for (long k = 0; k < grid_.size(); ++k) out(k) = stage_value(c, sum_(k), p.col(k).head(I_), p.col(k).tail(J_));
  return out;
}

Eigen::VectorXd ControlledChain::cost_vector(const Policy& p) const { return cost_vector(p, cost_); }

Eigen::VectorXd ControlledChain::idleness_vector(const Policy& p, int j, double m) const {
  Eigen::VectorXd out(grid_.size());
  for (long k = 0; k < grid_.size(); ++k) {
    double s = sum_(k);
    out(k) = s < 0.0 ? std::pow(-s * p(I_ + j, k), m) : 0.0;
  }
  return out;
}

struct PolicyEvaluator::Impl {
  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
  std::vector<std::pair<long, double>> pinned_row;  // row k0 of the generator
  long k0 = 0;
  Eigen::VectorXd w;
  double denom = 0.0;

  double row_dot(const Eigen::VectorXd& v) const {
    double acc = 0.0;
    for (auto [c, val] : pinned_row) acc += val * v(c);
    return acc;
  }
  Eigen::VectorXd solve_pinned(const Eigen::VectorXd& f) const {
    Eigen::VectorXd rhs = f;
    rhs(k0) = 0.0;
    Eigen::VectorXd v = lu.solve(rhs);
    if (lu.info() != Eigen::Success || !v.allFinite())
      throw Error(ErrorCode::SingularEvaluation, "Poisson solve failed");
    return v;
  }
};

PolicyEvaluator::PolicyEvaluator(const ControlledChain& chain, const Policy& p) : impl_(std::make_shared<Impl>()) {
  Eigen::SparseMatrix<double> L = chain.generator(p);
  const long k0 = chain.grid().origin();
  impl_->k0 = k0;
  // Replace row k0 by the pin V(k0) = 0.
  Eigen::SparseMatrix<double, Eigen::RowMajor> R = L;
  for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(R, k0); it; ++it) {
    impl_->pinned_row.emplace_back(it.col(), it.value());
    it.valueRef() = it.col() == k0 ? 1.0 : 0.0;
  }
  Eigen::SparseMatrix<double> M = R;
  M.prune(0.0);
  impl_->lu.compute(M);
  if (impl_->lu.info() != Eigen::Success)
    throw Error(ErrorCode::SingularEvaluation, "generator is singular; the grid chain may not communicate");
  impl_->w = impl_->solve_pinned(Eigen::VectorXd::Ones(chain.size()));
  impl_->denom = impl_->row_dot(impl_->w) - 1.0;
  if (!(std::abs(impl_->denom) > 1e-300)) throw Error(ErrorCode::SingularEvaluation, "degenerate Poisson equation");
}

double PolicyEvaluator::average(const Eigen::VectorXd& f) const {
  Eigen::VectorXd v = impl_->solve_pinned(f);
  return (impl_->row_dot(v) - f(impl_->k0)) / impl_->denom;
}

Eigen::VectorXd PolicyEvaluator::relative_value(const Eigen::VectorXd& f, double avg) const {
  Eigen::VectorXd v = impl_->solve_pinned(f);
  Eigen::VectorXd out = avg * impl_->w - v;
  out.array() -= out(impl_->k0);
  return out;
}

PolicyValue evaluate_policy(const ControlledChain& chain, const Policy& p) {
  PolicyEvaluator ev(chain, p);
  Eigen::VectorXd c = chain.cost_vector(p);
  PolicyValue out;
  out.rho = ev.average(c);
  out.V = ev.relative_value(c, out.rho);
  return out;
}

Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& v) {
  const int n = static_cast<int>(v.size());
  std::vector<double> u(v.data(), v.data() + n);
  std::sort(u.begin(), u.end(), std::greater<double>());
  double cum = 0.0, tau = 0.0;
  for (int k = 0; k < n; ++k) {
    cum += u[k];
    double t = (cum - 1.0) / (k + 1);
    if (u[k] - t > 0.0) tau = t;
  }
  return (v.array() - tau).max(0.0).matrix();
}

namespace {

struct ImproveStats {
  long changes = 0;
  double residual = 0.0;  // max over nodes of |min_u H - target|
};

// One greedy step against V. `target(k)` is the value H must equal under the current policy
// (rho for the ergodic problem, alpha V(k) for the discounted one).
template <class Target>
ImproveStats improve(const ControlledChain& chain, const Eigen::VectorXd& V, Policy& P, Target target,
                     const HjbOptions& opts) {
  const Grid& g = chain.grid();
  const int I = chain.I(), J = chain.J();
  const long N = g.size();
  const StageCost& cost = chain.stage_cost();
  const int chunks = static_cast<int>(std::min<long>(N, 64));
  std::vector<long> changes(chunks, 0);
  std::vector<double> resid(chunks, 0.0);

  parallel_for(chunks, opts.threads, [&](int c) {
    long lo = N * c / chunks, hi = N * (c + 1) / chunks;
    Eigen::VectorXd uc(I), us(J), best_c(I), best_s(J), cand(std::max(I, J)), grad(std::max(I, J));
    double p[8];
    for (long k = lo; k < hi; ++k) {
      if (g.on_boundary(k)) {
        resid[c] = std::max(resid[c], std::abs(chain.hamiltonian(k, P.col(k).head(I), P.col(k).tail(J), V) - target(k)));
        continue;
      }
      const double s = chain.sum_at(k);
      uc = P.col(k).head(I);
      us = P.col(k).tail(J);
      const double h_cur = chain.hamiltonian(k, uc, us, V);
      double h_best = h_cur;
      best_c = uc;
      best_s = us;
      if (s != 0.0) {
        const bool queue_side = s > 0.0;
        const int n = queue_side ? I : J;
        const double expo = queue_side ? cost.m : cost.p;
        Eigen::VectorXd& part = queue_side ? uc : us;
        const Eigen::VectorXd current = part;
        auto H = [&](const Eigen::VectorXd& u) {
          part = u;
          return chain.hamiltonian(k, uc, us, V);
        };
        // Vertices first: exact when the Hamiltonian is affine in the control.
        double h_vertex = std::numeric_limits<double>::infinity();
        Eigen::VectorXd vbest(n);
        for (int a = 0; a < n; ++a) {
          double hv = H(Eigen::VectorXd::Unit(n, a));
          if (hv < h_vertex) h_vertex = hv, vbest = Eigen::VectorXd::Unit(n, a);
        }
        Eigen::VectorXd cand_best = vbest;
        double h_cand = h_vertex;
        if (expo != 1.0) {
          // Projected gradient with backtracking, warm-started at the current control.
          chain.gradient(k, V, p);
          const Eigen::MatrixXd& M = queue_side ? chain.control_matrix_c() : chain.control_matrix_s();
          const Eigen::VectorXd& w = queue_side ? cost.qw : cost.iw;
          const double as = std::abs(s);
          const double sm = std::pow(as, expo);
          Eigen::VectorXd u = current;
          double hu = H(u);
          double step = 1.0 / (expo * std::max(1.0, expo - 1.0) * sm * std::max(w.cwiseAbs().maxCoeff(), 1e-12));
          for (int it = 0; it < opts.gradient_steps; ++it) {
            Eigen::VectorXd gr(n);
            for (int a = 0; a < n; ++a) {
              double dr = 0.0;
              for (int i = 0; i < I; ++i) dr += M(i, a) * p[i];
              gr(a) = as * dr + (u(a) > 0.0 ? expo * sm * w(a) * std::pow(u(a), expo - 1.0) : 0.0);
            }
            bool moved = false;
            for (int bt = 0; bt < 30; ++bt) {
              Eigen::VectorXd trial = project_to_simplex(u - step * gr);
              double ht = H(trial);
              if (ht < hu) {
                u = trial;
                hu = ht;
                moved = true;
                step *= 2.0;
                break;
              }
              step *= 0.5;
            }
            if (!moved) break;
          }
          if (hu < h_cand) h_cand = hu, cand_best = u;
        }
        part = current;
        if (h_cand < h_cur - 1e-11 * std::max(1.0, std::abs(h_cur))) {
          h_best = h_cand;
          if (queue_side)
            best_c = cand_best;
          else
            best_s = cand_best;
        }
      }
      if (h_best < h_cur) {
        P.col(k).head(I) = best_c;
        P.col(k).tail(J) = best_s;
        ++changes[c];
      }
      resid[c] = std::max(resid[c], std::abs(std::min(h_best, h_cur) - target(k)));
    }
  });
  ImproveStats st;
  for (int c = 0; c < chunks; ++c) {
    st.changes += changes[c];
    st.residual = std::max(st.residual, resid[c]);
  }
  return st;
}

Policy initial_policy(const ControlledChain& chain, const HjbOptions& opts) {
  if (opts.initial_policy) {
    if (opts.initial_policy->rows() != chain.I() + chain.J() || opts.initial_policy->cols() != chain.size())
      throw Error(ErrorCode::ShapeMismatch, "initial policy does not match the grid");
    return *opts.initial_policy;
  }
  Policy P = chain.constant_policy(chain.fallback());
  if (opts.initial_V) {
    if (opts.initial_V->size() != chain.size()) throw Error(ErrorCode::ShapeMismatch, "initial V does not match the grid");
    improve(chain, *opts.initial_V, P, [](long) { return 0.0; }, opts);
  }
  return P;
}

HjbSolution run_policy_iteration(const ControlledChain& chain, const HjbOptions& opts) {
  HjbSolution sol;
  sol.grid = chain.grid();
  sol.fallback = chain.fallback();
  Policy P = initial_policy(chain, opts);
  for (int it = 1; it <= opts.max_iterations; ++it) {
    PolicyValue pv = evaluate_policy(chain, P);
    sol.iterations = it;
    sol.rho = pv.rho;
    sol.V = pv.V;
    sol.rho_history.push_back(pv.rho);
    Policy next = P;
    ImproveStats st = improve(chain, pv.V, next, [&](long) { return pv.rho; }, opts);
    sol.residual = st.residual;
    if (st.changes == 0) {
      sol.converged = true;
      break;
    }
    P = std::move(next);
    if (it == opts.max_iterations) {
      PolicyValue last = evaluate_policy(chain, P);
      sol.rho = last.rho;
      sol.V = last.V;
    }
  }
  sol.policy = std::move(P);
  return sol;
}

}  // namespace

HjbSolution solve_ergodic(const DriftForm& form, const StageCost& cost, const GridSpec& grid, const HjbOptions& opts) {
  ControlledChain chain(form, cost, grid, opts.scheme);
  return run_policy_iteration(chain, opts);
}

HjbSolution solve_ergodic(const DriftForm& form, const CostSpec& cost, const GridSpec& grid, const HjbOptions& opts) {
  validate_cost(cost, form.I(), form.J());
  return solve_ergodic(form, stage_cost(cost), grid, opts);
}

DiscountedSolution solve_discounted(const DriftForm& form, const StageCost& cost, const GridSpec& grid, double alpha,
                                    const HjbOptions& opts) {
  if (!(alpha > 0.0)) throw Error(ErrorCode::InvalidInput, "discount rate must be > 0");
  ControlledChain chain(form, cost, grid, opts.scheme);
  DiscountedSolution sol;
  sol.grid = chain.grid();
  Policy P = initial_policy(chain, opts);
  const long N = chain.size();
  Eigen::SparseMatrix<double> eye(N, N);
  eye.setIdentity();
  for (int it = 1; it <= opts.max_iterations; ++it) {
    Eigen::SparseMatrix<double> A = alpha * eye - chain.generator(P);
    Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu(A);
    if (lu.info() != Eigen::Success) throw Error(ErrorCode::SingularEvaluation, "discounted system is singular");
    sol.V = lu.solve(chain.cost_vector(P));
    sol.iterations = it;
    Policy next = P;
    ImproveStats st = improve(chain, sol.V, next, [&](long k) { return alpha * sol.V(k); }, opts);
    if (st.changes == 0) {
      sol.converged = true;
      break;
    }
    P = std::move(next);
  }
  sol.policy = std::move(P);
  return sol;
}

namespace {

struct DualPoint {
  Eigen::VectorXd lam;
  Policy policy;
  Eigen::VectorXd g;  // constraint residuals
};

Eigen::VectorXd idleness_averages(const ControlledChain& chain, const PolicyEvaluator& ev, const Policy& P, double m) {
  Eigen::VectorXd out(chain.J());
  for (int j = 0; j < chain.J(); ++j) out(j) = ev.average(chain.idleness_vector(P, j, m));
  return out;
}

// Finds w in [0,1] with phi(w) ~ 0 given phi(0) <= 0 < phi(1), keeping the side with phi <= 0.
template <class Phi>
double bisect_mix(Phi phi) {
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 50; ++it) {
    double mid = 0.5 * (lo + hi);
    double v = phi(mid);
    if (std::abs(v) < 1e-9) return mid;
    if (v < 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return lo;
}

void finish(HjbSolution& sol, const ControlledChain& chain, const StageCost& r0, double m) {
  PolicyEvaluator ev(chain, sol.policy);
  Eigen::VectorXd c = chain.cost_vector(sol.policy, r0);
  sol.rho = ev.average(c);
  sol.V = ev.relative_value(c, sol.rho);
  sol.constraint_values = idleness_averages(chain, ev, sol.policy, m);
}

}  // namespace

HjbSolution solve_constrained(const DriftForm& form, const CostSpec& cost, const ConstraintSpec& cons,
                              const GridSpec& grid, const HjbOptions& opts) {
  validate_cost(cost, form.I(), form.J());
  validate_constraints(cons, form.J());
  if (cost.i_weights.cwiseAbs().maxCoeff() != 0.0)
    throw Error(ErrorCode::InvalidInput, "constrained mode expects zero idleness weights");
  const int I = form.I(), J = form.J();
  const StageCost r0 = stage_cost(cost);
  ControlledChain chain(form, r0, grid, opts.scheme);

  // Feasibility probe over constant controls.
  std::vector<ControlPoint> probes;
  for (int i = 0; i < I; ++i)
    for (int j = 0; j < J; ++j) probes.push_back(ControlPoint::vertex(I, J, i, j));
  probes.push_back({Eigen::VectorXd::Constant(I, 1.0 / I), Eigen::VectorXd::Constant(J, 1.0 / J)});
  probes.push_back({Eigen::VectorXd::Constant(I, 1.0 / I), cons.delta / cons.delta.sum()});
  bool feasible = false;
  for (const auto& u : probes) {
    Policy P = chain.constant_policy(u);
    PolicyEvaluator ev(chain, P);
    Eigen::VectorXd r = idleness_averages(chain, ev, P, cost.m);
    if ((r.array() < cons.delta.array()).all()) {
      feasible = true;
      break;
    }
  }
  if (!feasible) throw Error(ErrorCode::Infeasible, "no probed constant control meets the idleness budgets");

  Multipliers mult{Eigen::VectorXd::Zero(J)};
  HjbOptions inner = opts;
  std::vector<DualPoint> history;
  Eigen::VectorXd step(J), prev_g(J);
  HjbSolution sol;
  bool converged = false;
  for (int t = 0; t <= opts.max_dual_steps; ++t) {
    chain.set_cost(lagrangian_stage_cost(cost, cons, mult));
    sol = run_policy_iteration(chain, inner);
    inner.initial_policy = sol.policy;
    inner.initial_V.reset();
    PolicyEvaluator ev(chain, sol.policy);
    Eigen::VectorXd g = idleness_averages(chain, ev, sol.policy, cost.m) - cons.delta;
    history.push_back({mult.lam, sol.policy, g});
    Eigen::VectorXd rel = g.cwiseQuotient(cons.delta);

    bool primal_ok = (rel.array() < 0.005).all();
    bool slack_ok = true;
    for (int j = 0; j < J; ++j)
      if (mult.lam(j) > 0.0 && std::abs(rel(j)) >= 0.005) slack_ok = false;
    if (t == 0) {
      if (primal_ok && (g.array() <= 0.0).all()) {
        converged = true;
        break;
      }
      double rho0 = ev.average(chain.cost_vector(sol.policy, r0));
      step = (0.5 * std::max(rho0, 1e-3) / cons.delta.array()).matrix();
      prev_g = g;
    }
    if (t > 0 && primal_ok && slack_ok) {
      converged = true;
      break;
    }
    Eigen::VectorXd next = (mult.lam + step.cwiseProduct(rel)).cwiseMax(0.0);
    double move = (next - mult.lam).cwiseAbs().maxCoeff();
    for (int j = 0; j < J; ++j) {
      if (t > 0 && (g(j) > 0.0) != (prev_g(j) > 0.0))
        step(j) *= 0.5;
      else if (t > 0)
        step(j) *= 1.5;
    }
    prev_g = g;
    if (t > 0 && move < 1e-4 * std::max(1.0, mult.lam.cwiseAbs().maxCoeff())) break;
    mult.lam = next;
  }

  // Mix the nearest feasible and violating policies so the budgets bind exactly.
  const DualPoint& last = history.back();
  if (!converged || (last.g.array() > 0.0).any()) {
    const DualPoint* feas = nullptr;
    const DualPoint* viol = nullptr;
    for (auto it = history.rbegin(); it != history.rend(); ++it) {
      bool ok = (it->g.array() <= 0.0).all();
      if (ok && !feas) feas = &*it;
      if (!ok && !viol) viol = &*it;
    }
    if (feas && viol) {
      auto mixed = [&](double w) -> Policy { return w * viol->policy + (1.0 - w) * feas->policy; };
      double w = bisect_mix([&](double w) {
        Policy P = mixed(w);
        PolicyEvaluator ev(chain, P);
        return ((idleness_averages(chain, ev, P, cost.m) - cons.delta).cwiseQuotient(cons.delta)).maxCoeff();
      });
      sol.policy = mixed(w);
      mult.lam = w * viol->lam + (1.0 - w) * feas->lam;
      converged = true;
    } else if (feas) {
      sol.policy = feas->policy;
      mult.lam = feas->lam;
    }
  }

  chain.set_cost(lagrangian_stage_cost(cost, cons, mult));
  finish(sol, chain, r0, cost.m);
  sol.multipliers = mult;
  Eigen::VectorXd rel = (sol.constraint_values - cons.delta).cwiseQuotient(cons.delta);
  sol.converged = converged && (rel.array() <= 0.01).all();
  return sol;
}

HjbSolution solve_fair(const DriftForm& form, const CostSpec& cost, const Eigen::VectorXd& theta, const GridSpec& grid,
                       const HjbOptions& opts) {
  validate_cost(cost, form.I(), form.J());
  const int I = form.I(), J = form.J();
  if (J < 2) throw Error(ErrorCode::InvalidInput, "fair allocation needs at least two pools");
  if (theta.size() != J) throw Error(ErrorCode::ShapeMismatch, "theta must have length J");
  if (!(theta.array() > 0.0).all() || std::abs(theta.sum() - 1.0) > 1e-9)
    throw Error(ErrorCode::InvalidInput, "theta must be an interior point of the simplex");
  if (cost.i_weights.cwiseAbs().maxCoeff() != 0.0)
    throw Error(ErrorCode::InvalidInput, "fair mode expects zero idleness weights");
  const StageCost r0 = stage_cost(cost);
  ControlledChain chain(form, r0, grid, opts.scheme);

  for (int j = 0; j < J; ++j) {
    ControlPoint probe = ControlPoint::vertex(I, J, 0, j);
    probe.uc = grid.fallback.uc;
    double r = evaluate_policy(chain, chain.constant_policy(probe)).rho;
    if (!std::isfinite(r)) throw Error(ErrorCode::Infeasible, "probe control has no finite cost");
  }

  auto residuals = [&](const Policy& P, double* total = nullptr) {
    PolicyEvaluator ev(chain, P);
    Eigen::VectorXd r = idleness_averages(chain, ev, P, cost.m);
    double S = std::max(r.sum(), 1e-300);
    if (total) *total = S;
    Eigen::VectorXd g(J - 1);
    for (int j = 0; j + 1 < J; ++j) g(j) = (r(j) - theta(j) * r.sum()) / S;
    return g;
  };

  Eigen::VectorXd lam = Eigen::VectorXd::Zero(J - 1);
  HjbOptions inner = opts;
  std::vector<DualPoint> history;
  Eigen::VectorXd step(J - 1), prev_g(J - 1);
  HjbSolution sol;
  bool converged = false;
  for (int t = 0; t <= opts.max_dual_steps; ++t) {
    chain.set_cost(fair_stage_cost(cost, theta, lam));
    sol = run_policy_iteration(chain, inner);
    inner.initial_policy = sol.policy;
    inner.initial_V.reset();
    double S = 0.0;
    Eigen::VectorXd g = residuals(sol.policy, &S);
    history.push_back({lam, sol.policy, g});
    if (g.cwiseAbs().maxCoeff() < 0.005) {
      converged = true;
      break;
    }
    if (t == 0) {
      double rho0 = evaluate_policy(ControlledChain(form, r0, grid, opts.scheme), sol.policy).rho;
      step = Eigen::VectorXd::Constant(J - 1, 0.5 * std::max(rho0, 1e-3) / S);
      prev_g = g;
    } else {
      for (int j = 0; j + 1 < J; ++j) {
        if ((g(j) > 0.0) != (prev_g(j) > 0.0))
          step(j) *= 0.5;
        else
          step(j) *= 1.5;
      }
    }
    prev_g = g;
    Eigen::VectorXd next = lam + step.cwiseProduct(g);
    if (t > 0 && (next - lam).cwiseAbs().maxCoeff() < 1e-4 * std::max(1.0, lam.cwiseAbs().maxCoeff())) break;
    lam = next;
  }

  if (!converged) {
    // Bracket on the worst residual and mix across the sign change.
    int worst = 0;
    history.back().g.cwiseAbs().maxCoeff(&worst);
    const DualPoint* below = nullptr;
    const DualPoint* above = nullptr;
    for (auto it = history.rbegin(); it != history.rend(); ++it) {
      if (it->g(worst) <= 0.0 && !below) below = &*it;
      if (it->g(worst) > 0.0 && !above) above = &*it;
    }
    if (below && above) {
      auto mixed = [&](double w) -> Policy { return w * above->policy + (1.0 - w) * below->policy; };
      double w = bisect_mix([&](double w) { return residuals(mixed(w))(worst); });
      sol.policy = mixed(w);
      lam = w * above->lam + (1.0 - w) * below->lam;
      converged = residuals(sol.policy).cwiseAbs().maxCoeff() < 0.005;
    }
  }

  chain.set_cost(fair_stage_cost(cost, theta, lam));
  finish(sol, chain, r0, cost.m);
  sol.multipliers = {lam};
  sol.converged = converged;
  return sol;
}

MarkovControl policy_control(const HjbSolution& sol) {
  auto gp = std::make_shared<GridPolicy>();
  gp->grid = sol.grid;
  gp->fallback = sol.fallback;
  const int I = static_cast<int>(sol.fallback.uc.size());
  const int J = static_cast<int>(sol.fallback.us.size());
  gp->u.reserve(sol.policy.cols());
  for (long k = 0; k < sol.policy.cols(); ++k)
    gp->u.push_back({sol.policy.col(k).head(I), sol.policy.col(k).tail(J)});
  return MarkovControl::grid(std::move(gp));
}

}  // namespace hwctrl
