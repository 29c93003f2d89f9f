#include "hwctrl/stability.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>

#include "hwctrl/error.hpp"
#include "hwctrl/leaf_elimination.hpp"

namespace hwctrl {

ControlPoint stabilizing_control(const Network& net) {
  int ihat = -1;
  for (int i = 0; i < net.I; ++i) {
    if (net.gamma(i) > 0.0) {
      ihat = i;
      break;
    }
  }
  if (ihat < 0) throw Error(ErrorCode::NoAbandonment, "every abandonment rate is zero");
  EliminationResult elim = eliminate(net, {LeafOrder::SmallestIndex, ihat});
  return ControlPoint::vertex(net.I, net.J, ihat, elim.j_of[ihat]);
}

double symmetric_part_min_eig(const Eigen::VectorXd& q, const Eigen::MatrixXd& B) {
  Eigen::MatrixXd S = q.asDiagonal() * B;
  S += S.transpose().eval();
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(S, Eigen::EigenvaluesOnly).eigenvalues()(0);
}

namespace {

std::vector<int> common_lower_order(const std::vector<Eigen::MatrixXd>& Bs, int I) {
  std::vector<char> placed(I, 0);
  std::vector<int> order;
  for (int pos = 0; pos < I; ++pos) {
    int pick = -1;
    for (int i = 0; i < I && pick < 0; ++i) {
      if (placed[i]) continue;
      bool ready = true;
      for (const auto& B : Bs)
        for (int k = 0; k < I && ready; ++k)
          if (k != i && !placed[k] && B(i, k) != 0.0) ready = false;
      if (ready) pick = i;
    }
    if (pick < 0) throw Error(ErrorCode::NotTriangular, "no ordering makes every matrix lower-triangular");
    placed[pick] = 1;
    order.push_back(pick);
  }
  return order;
}

double block_min_eig(const Eigen::VectorXd& q, const Eigen::MatrixXd& B, const std::vector<int>& idx) {
  const int n = static_cast<int>(idx.size());
  Eigen::MatrixXd S(n, n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) S(a, b) = q(idx[a]) * B(idx[a], idx[b]) + q(idx[b]) * B(idx[b], idx[a]);
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(S, Eigen::EigenvaluesOnly).eigenvalues()(0);
}

}  // namespace

LyapunovQ find_lyapunov_Q_unscaled(const std::vector<Eigen::MatrixXd>& Bs) {
  if (Bs.empty()) throw Error(ErrorCode::InvalidInput, "no matrices given");
  const int I = static_cast<int>(Bs.front().rows());
  for (const auto& B : Bs)
    if (B.rows() != I || B.cols() != I) throw Error(ErrorCode::ShapeMismatch, "matrices must be square and equal-sized");
  for (const auto& B : Bs)
    for (int i = 0; i < I; ++i)
      if (!(B(i, i) > 0.0))
        throw Error(ErrorCode::NonPositiveDiagonal, "diagonal entry " + std::to_string(i + 1) + " is not positive");
  std::vector<int> order = common_lower_order(Bs, I);

  Eigen::VectorXd q = Eigen::VectorXd::Zero(I);
  std::vector<double> trailing(Bs.size(), std::numeric_limits<double>::infinity());
  std::vector<int> block;
  for (int pos = I - 1; pos >= 0; --pos) {
    const int k = order[pos];
    double qk = 0.0;
    for (std::size_t b = 0; b < Bs.size(); ++b) {
      const auto& B = Bs[b];
      double v2 = 0.0;
      for (int i : block) v2 += std::pow(q(i) * B(i, k), 2);
      double need = 1.0 / B(k, k);
      if (!block.empty()) need = std::max(need, v2 / (trailing[b] * B(k, k)));
      qk = std::max(qk, need);
    }
    q(k) = qk;
    block.insert(block.begin(), k);
    for (std::size_t b = 0; b < Bs.size(); ++b) trailing[b] = block_min_eig(q, Bs[b], block);
  }
  return {q, *std::min_element(trailing.begin(), trailing.end())};
}

LyapunovQ find_lyapunov_Q(const std::vector<Eigen::MatrixXd>& Bs) {
  LyapunovQ raw = find_lyapunov_Q_unscaled(Bs);
  double scale = 8.0 / raw.c_min;
  LyapunovQ out{raw.q * scale, std::numeric_limits<double>::infinity()};
  for (const auto& B : Bs) out.c_min = std::min(out.c_min, symmetric_part_min_eig(out.q, B));
  return out;
}

LyapunovQ find_lyapunov_Q(const Eigen::MatrixXd& B1) { return find_lyapunov_Q(std::vector<Eigen::MatrixXd>{B1}); }

namespace {

struct Phi {
  double value, d1, d2;
};

Phi phi(double s, double m) {
  if (m >= 2.0) {
    double h = 0.5 * m;
    if (s <= 0.0) return {0.0, m == 2.0 ? 1.0 : 0.0, 0.0};
    return {std::pow(s, h), h * std::pow(s, h - 1.0), h * (h - 1.0) * std::pow(s, h - 2.0)};
  }
  double k = 0.5 * m - 1.0;
  double t = 1.0 + s;
  return {s * std::pow(t, k), std::pow(t, k) + k * s * std::pow(t, k - 1.0),
          2.0 * k * std::pow(t, k - 1.0) + k * (k - 1.0) * s * std::pow(t, k - 2.0)};
}

}  // namespace

double lyapunov_value(const Eigen::VectorXd& q, double m, const Eigen::VectorXd& x) {
  return phi(x.dot(q.cwiseProduct(x)), m).value;
}

double generator_of_V(const DriftForm& form, const Eigen::VectorXd& q, double m, const Eigen::VectorXd& x,
                      const ControlPoint& u) {
  Eigen::VectorXd qx = q.cwiseProduct(x);
  double s = x.dot(qx);
  Phi p = phi(s, m);
  Eigen::VectorXd half_a = 0.5 * form.a();
  double second = 2.0 * p.d1 * half_a.dot(q);
  if (s > 0.0) second += 4.0 * p.d2 * half_a.dot(qx.cwiseProduct(qx));
  return second + 2.0 * p.d1 * drift(form, x, u).dot(qx);
}

std::vector<Eigen::VectorXd> sphere_directions(int dim, int count) {
  std::vector<Eigen::VectorXd> out;
  out.reserve(count);
  if (dim == 1) {
    for (int n = 0; n < count; ++n) out.push_back(Eigen::VectorXd::Constant(1, n % 2 == 0 ? 1.0 : -1.0));
    return out;
  }
  const int d = dim + (dim % 2);
  // Generalized golden ratio: the root of x^(d+1) = x + 1.
  double g = 2.0;
  for (int it = 0; it < 60; ++it) g = std::pow(1.0 + g, 1.0 / (d + 1));
  Eigen::VectorXd alpha(d);
  for (int k = 0; k < d; ++k) alpha(k) = std::fmod(std::pow(1.0 / g, k + 1), 1.0);
  for (int n = 1; n <= count; ++n) {
    Eigen::VectorXd pt(d);
    for (int k = 0; k < d; ++k) pt(k) = std::fmod(0.5 + n * alpha(k), 1.0);
    Eigen::VectorXd z(d);
    for (int k = 0; k < d; k += 2) {
      double r = std::sqrt(-2.0 * std::log(std::max(pt(k), 1e-300)));
      z(k) = r * std::cos(2.0 * std::numbers::pi * pt(k + 1));
      z(k + 1) = r * std::sin(2.0 * std::numbers::pi * pt(k + 1));
    }
    Eigen::VectorXd v = z.head(dim);
    double nv = v.norm();
    if (nv < 1e-12) v = Eigen::VectorXd::Unit(dim, n % dim), nv = 1.0;
    out.push_back(v / nv);
  }
  return out;
}

GeometricDriftReport verify_geometric_drift(const DriftForm& form, const StabilityCertificate& cert,
                                            const std::vector<double>& radii, int samples_per_radius) {
  if (radii.empty() || samples_per_radius < 1) throw Error(ErrorCode::InvalidInput, "need radii and samples");
  const int I = form.I();
  const double rmax = *std::max_element(radii.begin(), radii.end());
  auto dirs = sphere_directions(I, samples_per_radius);
  for (int i = 0; i < I; ++i) {
    dirs.push_back(Eigen::VectorXd::Unit(I, i));
    dirs.push_back(-Eigen::VectorXd::Unit(I, i));
  }
  dirs.push_back(Eigen::VectorXd::Ones(I) / std::sqrt(double(I)));
  dirs.push_back(-Eigen::VectorXd::Ones(I) / std::sqrt(double(I)));

  auto L = [&](const Eigen::VectorXd& x) { return generator_of_V(form, cert.q, cert.m, x, cert.u_bar); };
  auto V = [&](const Eigen::VectorXd& x) { return lyapunov_value(cert.q, cert.m, x); };

  double rate = std::numeric_limits<double>::infinity();
  Eigen::VectorXd witness;
  for (const auto& d : dirs) {
    Eigen::VectorXd x = rmax * d;
    double r = -L(x) / V(x);
    if (r < rate) rate = r, witness = x;
  }
  if (!(rate > 0.0)) {
    std::string w;
    for (int i = 0; i < I; ++i) w += (i ? "," : "") + std::to_string(witness(i));
    throw Error(ErrorCode::DriftViolated, "generator does not decay at x = (" + w + ")");
  }

  GeometricDriftReport rep;
  rep.kappa1 = 0.5 * rate;

  // Fit kappa0 on a denser set of radii with an independent set of directions.
  auto fit_dirs = sphere_directions(I, std::max(64, samples_per_radius / 2) + samples_per_radius);
  fit_dirs.erase(fit_dirs.begin(), fit_dirs.begin() + samples_per_radius);
  fit_dirs.insert(fit_dirs.end(), dirs.end() - 2 * I - 2, dirs.end());
  double worst = L(Eigen::VectorXd::Zero(I));
  for (double r = rmax * 1e-4; r <= rmax * 1.0001; r *= 1.2)
    for (const auto& d : fit_dirs) {
      Eigen::VectorXd x = r * d;
      worst = std::max(worst, L(x) + rep.kappa1 * V(x));
    }
  rep.kappa0 = std::max(1.25 * worst, 1e-12);

  for (double r : radii) {
    for (const auto& d : dirs) {
      Eigen::VectorXd x = r * d;
      double lhs = L(x), v = V(x);
      double rhs = rep.kappa0 - rep.kappa1 * v;
      ++rep.samples;
      if (lhs - rhs > 1e-7 * std::max({1.0, std::abs(lhs), rep.kappa1 * v})) rep.violations.push_back({x, lhs, rhs});
    }
  }
  return rep;
}

StabilityCertificate build_certificate(const Network& net, const DriftForm& form, double m,
                                       const std::vector<double>& radii, int samples_per_radius) {
  if (!(m >= 1.0)) throw Error(ErrorCode::InvalidInput, "moment exponent must be >= 1");
  StabilityCertificate cert;
  cert.u_bar = stabilizing_control(net);
  cert.m = m;
  const Eigen::RowVectorXd e = Eigen::RowVectorXd::Ones(net.I);
  Eigen::MatrixXd A_pos = form.B1 - (form.B1 - form.Gamma()) * cert.u_bar.uc * e;
  Eigen::MatrixXd A_neg = form.B1 + form.B2 * cert.u_bar.us * e;
  // Exact zeros matter for the triangular ordering.
  A_pos = A_pos.unaryExpr([](double v) { return std::abs(v) < 1e-13 ? 0.0 : v; });
  A_neg = A_neg.unaryExpr([](double v) { return std::abs(v) < 1e-13 ? 0.0 : v; });
  LyapunovQ lq = find_lyapunov_Q(std::vector<Eigen::MatrixXd>{A_pos, A_neg});
  cert.q = lq.q;
  cert.c_min = lq.c_min;
  GeometricDriftReport rep = verify_geometric_drift(form, cert, radii, samples_per_radius);
  cert.kappa0 = rep.kappa0;
  cert.kappa1 = rep.kappa1;
  return cert;
}

const std::vector<double>& cone_delta_grid() {
  static const std::vector<double> grid{0.5, 0.2, 0.1, 0.05, 0.02, 0.01};
  return grid;
}

namespace {

bool outside_cone(const ConeSpec& cone, const Eigen::VectorXd& x) {
  double s = x.sum(), n = x.norm();
  return cone.two_sided ? std::abs(s) <= cone.delta * n : s <= cone.delta * n;
}

// Unit directions in the closed complement of the cone.
std::vector<Eigen::VectorXd> out_of_cone_directions(const ConeSpec& cone, int I, int count) {
  std::vector<Eigen::VectorXd> out;
  const double root = std::sqrt(double(I));
  const Eigen::VectorXd ehat = Eigen::VectorXd::Ones(I) / root;
  if (I == 1) {
    if (!cone.two_sided) out.push_back(-Eigen::VectorXd::Ones(1));
    return out;
  }
  const double hi = std::min(1.0, cone.delta / root);
  const double lo = cone.two_sided ? -hi : -1.0;
  auto dirs = sphere_directions(I, count);
  for (int n = 0; n < count; ++n) {
    Eigen::VectorXd w = dirs[n] - dirs[n].dot(ehat) * ehat;
    if (w.norm() < 1e-9) w = Eigen::VectorXd::Unit(I, 0) - ehat / root;
    w.normalize();
    // Mix endpoints in so the cone boundary is always sampled.
    double t = n % 4 == 0 ? hi : n % 4 == 1 ? lo : lo + (hi - lo) * std::fmod(0.5 + n * 0.6180339887498949, 1.0);
    out.push_back(std::sqrt(std::max(0.0, 1.0 - t * t)) * w + t * ehat);
  }
  for (int i = 0; i < I; ++i)
    for (double sg : {1.0, -1.0}) {
      Eigen::VectorXd x = sg * Eigen::VectorXd::Unit(I, i);
      if (outside_cone(cone, x)) out.push_back(x);
    }
  return out;
}

std::vector<ControlPoint> probe_controls(int I, int J) {
  std::vector<ControlPoint> out;
  for (int i = 0; i < I; ++i)
    for (int j = 0; j < J; ++j) out.push_back(ControlPoint::vertex(I, J, i, j));
  std::mt19937_64 rng(7);
  std::exponential_distribution<double> expo;
  for (int k = 0; k < 8; ++k) {
    ControlPoint u{Eigen::VectorXd(I), Eigen::VectorXd(J)};
    for (int i = 0; i < I; ++i) u.uc(i) = expo(rng);
    for (int j = 0; j < J; ++j) u.us(j) = expo(rng);
    u.uc /= u.uc.sum();
    u.us /= u.us.sum();
    out.push_back(u);
  }
  return out;
}

// min over directions and controls of -x'Q b_lin(x,u), with max q normalized to 1.
double principal_rate(const DriftForm& form, const Eigen::VectorXd& q, const std::vector<Eigen::VectorXd>& dirs,
                      const std::vector<ControlPoint>& controls) {
  DriftForm lin = form;
  lin.ell.setZero();
  Eigen::VectorXd qn = q / q.maxCoeff();
  double rate = std::numeric_limits<double>::infinity();
  for (const auto& x : dirs)
    for (const auto& u : controls) rate = std::min(rate, -qn.cwiseProduct(x).dot(drift(lin, x, u)));
  return rate;
}

Eigen::VectorXd search_diagonal_q(const DriftForm& form, const std::vector<Eigen::VectorXd>& dirs,
                                  const std::vector<ControlPoint>& controls, const std::vector<Eigen::VectorXd>& seeds) {
  const int I = form.I();
  Eigen::VectorXd best = seeds.front();
  double best_rate = -std::numeric_limits<double>::infinity();
  for (const auto& s : seeds) {
    double r = principal_rate(form, s, dirs, controls);
    if (r > best_rate) best_rate = r, best = s;
  }
  Eigen::VectorXd logq = best.array().log().matrix();
  for (double step = 1.0; step > 1e-3; step *= 0.5) {
    bool improved = true;
    while (improved) {
      improved = false;
      for (int i = 0; i < I; ++i)
        for (double sg : {1.0, -1.0}) {
          Eigen::VectorXd trial = logq;
          trial(i) += sg * step;
          double r = principal_rate(form, trial.array().exp().matrix(), dirs, controls);
          if (r > best_rate + 1e-12) {
            best_rate = r;
            logq = trial;
            improved = true;
          }
        }
    }
  }
  return logq.array().exp().matrix();
}

}  // namespace

HypothesisAReport verify_hypothesis_A(const Network& net, const StaticPlan& plan, const ConeSpec& cone, double m,
                                      int samples) {
  const int I = net.I;
  if (!(cone.delta > 0.0) || !(cone.delta < std::sqrt(double(I))))
    throw Error(ErrorCode::InvalidInput, "cone opening must lie in (0, sqrt(I))");
  if (!(m >= 1.0)) throw Error(ErrorCode::InvalidInput, "moment exponent must be >= 1");
  DriftForm form = extract_drift_form(net, plan);

  HypothesisAReport rep;
  rep.cone = cone;
  auto dirs = out_of_cone_directions(cone, I, std::max(samples, 16));
  auto controls = probe_controls(I, net.J);
  LyapunovQ base = find_lyapunov_Q(form.B1);
  if (dirs.empty()) {
    rep.q = base.q;
    rep.vacuous = true;
    rep.success = true;
    return rep;
  }

  if (cone.two_sided) {
    rep.q = base.q;
  } else {
    rep.q = search_diagonal_q(form, dirs, controls, {Eigen::VectorXd::Ones(I), base.q});
  }
  double rate = principal_rate(form, rep.q, dirs, controls);
  rep.asymptotic_rate = rate;
  if (!(rate > 1e-9))
    throw Error(ErrorCode::ConeTooNarrow, "no diagonal Q gives decay outside the cone at delta = " +
                                              std::to_string(cone.delta));

  // Principal part of L V on the unit sphere is m (x'Qx)^{m/2-1} x'Q b_lin(x,u).
  auto L = [&](const Eigen::VectorXd& x, const ControlPoint& u) { return generator_of_V(form, rep.q, m, x, u); };
  double qmin = rep.q.minCoeff(), qmax = rep.q.maxCoeff();
  double lower = m * std::pow(m >= 2.0 ? qmin : qmax, 0.5 * m - 1.0) * rate * qmax;
  double c4 = 0.5 * lower;

  const std::vector<double> radii{0.0, 0.1, 0.3, 1.0, 3.0, 10.0, 30.0, 100.0, 300.0, 1000.0};
  double K = 1.0;
  for (double r : radii)
    for (const auto& d : dirs)
      for (const auto& u : controls) {
        Eigen::VectorXd x = r * d;
        K = std::max(K, L(x, u) + c4 * std::pow(x.norm(), m));
      }

  double C4 = std::numeric_limits<double>::infinity();
  for (double r : {1.0, 10.0, 100.0, 1000.0})
    for (const auto& d : dirs)
      for (const auto& u : controls) {
        Eigen::VectorXd x = r * d;
        C4 = std::min(C4, (1.0 - L(x, u) / K) / std::pow(r, m));
      }
  rep.C4 = C4;

  double C5 = 0.0;
  for (const auto& d : sphere_directions(I, std::max(samples, 16))) {
    if (outside_cone(cone, d)) continue;
    for (double r : {1.0, 10.0, 100.0, 1000.0})
      for (const auto& u : controls) {
        Eigen::VectorXd x = r * d;
        C5 = std::max(C5, (L(x, u) / K - 1.0) / std::pow(std::abs(x.sum()), m));
      }
  }
  rep.C5 = C5;
  if (!(rep.C4 > 0.0))
    throw Error(ErrorCode::ConeTooNarrow, "outside-cone bound fails at delta = " + std::to_string(cone.delta));
  rep.success = true;
  return rep;
}

HypothesisAReport scan_cone(const Network& net, const StaticPlan& plan, bool two_sided, double m, int samples) {
  for (double delta : cone_delta_grid()) {
    if (!(delta < std::sqrt(double(net.I)))) continue;
    try {
      return verify_hypothesis_A(net, plan, {delta, two_sided}, m, samples);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::ConeTooNarrow) throw;
    }
  }
  throw Error(ErrorCode::ConeTooNarrow, std::string(two_sided ? "two" : "one") + "-sided cone fails at every delta");
}

}  // namespace hwctrl
