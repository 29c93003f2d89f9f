#include <CLI11.hpp>
#include <Eigen/Core>
#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "hwctrl/diffusion_sim.hpp"
#include "hwctrl/error.hpp"
#include "hwctrl/hjb.hpp"
#include "hwctrl/io.hpp"
#include "hwctrl/parallel.hpp"
#include "hwctrl/prelimit_ctmc.hpp"

using namespace hwctrl;
namespace fs = std::filesystem;

namespace {

struct RunConfig {
  std::string command;
  std::string spec_path;
  std::vector<std::string> overrides;
  std::string out_dir = ".";
  unsigned long long seed = 1;
  int threads = 0;
  double radius = 8.0;
  double mesh = 0.1;
  std::string alpha;
  std::string beta;
  bool constrained = false;
  bool fair = false;
  double n = 100.0;
  double horizon = 1000.0;
  double dt = 0.01;
  double m = 2.0;
  std::string uc;
  std::string us;
  long path_stride = 0;
};

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << v;
  return os.str();
}

Eigen::VectorXd parse_list(const std::string& text, const char* what) {
  std::vector<double> vals;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t used = 0;
      vals.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidInput, std::string("bad number in --") + what + ": '" + tok + "'");
    }
  }
  return Eigen::Map<Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

std::string csv_row(const std::vector<double>& v) {
  std::string out;
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (k) out += ',';
    out += format_double(v[k]);
  }
  return out + "\n";
}

class Runner {
 public:
  explicit Runner(RunConfig cfg) : cfg_(std::move(cfg)), t0_(std::chrono::steady_clock::now()) {}

  int run() {
    json doc = read_json_file(cfg_.spec_path);
    for (const auto& o : cfg_.overrides) apply_override(doc, o);
    problem_ = parse_problem(doc);
    input_hash_ = fnv1a(dump(doc) + dump(config_json()));
    fs::create_directories(cfg_.out_dir);

    const std::string& c = cfg_.command;
    if (c == "validate") validate_cmd();
    else if (c == "plan") plan_cmd();
    else if (c == "drift") drift_cmd();
    else if (c == "gmap") gmap_cmd();
    else if (c == "stability") stability_cmd();
    else if (c == "simulate") simulate_cmd();
    else if (c == "ctmc") ctmc_cmd();
    else if (c == "solve") solve_cmd();
    else throw Error(ErrorCode::InvalidInput, "unknown command '" + c + "'");
    write_manifest();
    return 0;
  }

 private:
  json config_json() const {
    return {{"command", cfg_.command}, {"overrides", cfg_.overrides}, {"seed", cfg_.seed},
            {"radius", cfg_.radius},   {"mesh", cfg_.mesh},           {"alpha", cfg_.alpha},
            {"beta", cfg_.beta},       {"constrained", cfg_.constrained}, {"fair", cfg_.fair},
            {"n", cfg_.n},             {"horizon", cfg_.horizon},     {"dt", cfg_.dt},
            {"m", cfg_.m},             {"uc", cfg_.uc},               {"us", cfg_.us},
            {"path_stride", cfg_.path_stride}};
  }

  void emit(const std::string& name, const std::string& text) {
    write_text_file((fs::path(cfg_.out_dir) / name).string(), text);
    outputs_.push_back(name);
  }

  void write_manifest() {
    double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
    std::time_t now = std::time(nullptr);
    char stamp[32];
    std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    json m = {{"command", cfg_.command},
              {"spec", cfg_.spec_path},
              {"input_hash", hex(input_hash_)},
              {"seed", cfg_.seed},
              {"threads", resolve_threads(cfg_.threads)},
              {"versions",
               {{"hwctrl", "0.1.0"},
                {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                              std::to_string(EIGEN_MINOR_VERSION)},
                {"compiler", __VERSION__}}},
              {"config", config_json()},
              {"outputs", outputs_},
              {"wall_time_s", wall},
              {"timestamp", stamp}};
    write_text_file((fs::path(cfg_.out_dir) / ("manifest_" + cfg_.command + ".json")).string(), dump(m));
  }

  const Network& net() {
    if (!net_) net_ = validate_network(problem_.network);
    return *net_;
  }
  const StaticPlan& plan() {
    if (!plan_) plan_ = solve_static_plan(net());
    return *plan_;
  }
  const DriftForm& form() {
    if (!form_) form_ = extract_drift_form(net(), plan());
    return *form_;
  }
  const CostSpec& cost() {
    if (!problem_.cost) throw Error(ErrorCode::InvalidInput, "spec has no cost section");
    return *problem_.cost;
  }

  ControlPoint chosen_control() {
    const Network& N = net();
    if (cfg_.uc.empty() && cfg_.us.empty()) return stabilizing_control(N);
    if (cfg_.uc.empty() || cfg_.us.empty()) throw Error(ErrorCode::InvalidInput, "--uc and --us go together");
    ControlPoint u{parse_list(cfg_.uc, "uc"), parse_list(cfg_.us, "us")};
    require_valid(u, N.I, N.J);
    return u;
  }

  void validate_cmd() {
    const Network& N = net();
    json edges = json::array();
    for (const Edge& e : N.edges) edges.push_back({e.cls + 1, e.pool + 1});
    LeafSet lv = leaves(N);
    json cl = json::array(), pl = json::array();
    for (const auto& v : lv.classes) cl.push_back(v.index);
    for (const auto& v : lv.pools) pl.push_back(v.index);
    emit("network.json", dump({{"I", N.I},
                               {"J", N.J},
                               {"edges", edges},
                               {"class_leaves", cl},
                               {"pool_leaves", pl},
                               {"has_abandonment", N.has_abandonment()}}));
  }

  void plan_cmd() { emit("plan.json", dump(to_json(plan(), net()))); }

  void drift_cmd() {
    json j = to_json(form());
    EliminationResult e = eliminate(net());
    json order = json::array();
    for (int k : e.order) order.push_back(k + 1);
    j["elimination_order"] = order;
    emit("drift.json", dump(j));
  }

  void gmap_cmd() {
    if (cfg_.alpha.empty() || cfg_.beta.empty()) throw Error(ErrorCode::InvalidInput, "gmap needs --alpha and --beta");
    Eigen::MatrixXd psi = solve_gmap(net(), parse_list(cfg_.alpha, "alpha"), parse_list(cfg_.beta, "beta"));
    std::string text;
    for (int i = 0; i < psi.rows(); ++i) {
      std::vector<double> row(psi.cols());
      for (int j = 0; j < psi.cols(); ++j) row[j] = psi(i, j);
      text += csv_row(row);
    }
    std::cout << text;
    emit("psi.csv", text);
  }

  void stability_cmd() {
    StabilityCertificate cert = build_certificate(net(), form(), cfg_.m);
    GeometricDriftReport rep = verify_geometric_drift(form(), cert, {1.0, 10.0, 100.0, 1000.0}, 1024);
    json j = to_json(cert);
    j["samples"] = rep.samples;
    j["violations"] = rep.violations.size();
    json cones = json::array();
    for (bool two : {true, false}) {
      HypothesisAReport h;
      try {
        h = scan_cone(net(), plan(), two, cfg_.m, 2048);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::ConeTooNarrow) throw;
        cones.push_back({{"two_sided", two}, {"success", false}, {"message", e.what()}});
        continue;
      }
      cones.push_back({{"two_sided", two},
                       {"success", h.success},
                       {"delta", h.cone.delta},
                       {"vacuous", h.vacuous},
                       {"asymptotic_rate", h.asymptotic_rate},
                       {"C4", h.C4},
                       {"C5", h.C5},
                       {"q", to_json(h.q)}});
    }
    j["cones"] = cones;
    emit("certificate.json", dump(j));
    std::string csv;
    for (int i = 0; i < form().I(); ++i) csv += "x" + std::to_string(i + 1) + ",";
    csv += "lhs,rhs\n";
    for (const auto& v : rep.violations) {
      std::vector<double> row(v.x.data(), v.x.data() + v.x.size());
      row.push_back(v.lhs);
      row.push_back(v.rhs);
      csv += csv_row(row);
    }
    emit("violations.csv", csv);
  }

  void simulate_cmd() {
    ControlPoint u = chosen_control();
    SimConfig sc;
    sc.dt = cfg_.dt;
    sc.horizon = cfg_.horizon;
    sc.seed = cfg_.seed;
    MarkovControl ctrl = MarkovControl::constant(u);
    ErgodicEstimate est = estimate_ergodic_cost(form(), ctrl, cost(), problem_.constraints, sc);
    json per = json::array();
    for (const auto& e : est.per_constraint) per.push_back({{"mean", e.mean}, {"half_width", e.half_width}});
    emit("ergodic.json", dump({{"control", to_json(u)},
                               {"mean", est.mean},
                               {"half_width", est.half_width},
                               {"idleness", per},
                               {"dt", sc.dt},
                               {"horizon", sc.horizon},
                               {"burn_in", sc.effective_burn_in()},
                               {"batches", sc.batches}}));
    if (cfg_.path_stride > 0) {
      const StageCost r = stage_cost(cost());
      std::string csv = "t";
      for (int i = 0; i < form().I(); ++i) csv += ",x" + std::to_string(i + 1);
      csv += ",cost\n";
      SimConfig pc = sc;
      pc.horizon = std::min(sc.horizon, 1000.0);
      simulate_path(form(), ctrl, pc, [&](long step, double t, const Eigen::VectorXd& x, const ControlPoint& uu) {
        if (step % cfg_.path_stride) return;
        std::vector<double> row{t};
        row.insert(row.end(), x.data(), x.data() + x.size());
        row.push_back(r(x, uu));
        csv += csv_row(row);
      });
      emit("path.csv", csv);
    }
  }

  void ctmc_cmd() {
    ControlPoint u = chosen_control();
    NthSystem sys = build_nth_system(net(), cfg_.n);
    CtmcConfig cc;
    cc.horizon = cfg_.horizon;
    cc.seed = cfg_.seed;
    CtmcEstimate est = simulate_ctmc(net(), sys, plan(), MarkovControl::constant(u), stage_cost(cost()), cc);
    auto ests = [](const std::vector<Estimate>& v) {
      json a = json::array();
      for (const auto& e : v) a.push_back({{"mean", e.mean}, {"half_width", e.half_width}});
      return a;
    };
    json servers = json::array();
    for (int j = 0; j < sys.N_n.size(); ++j) servers.push_back(sys.N_n(j));
    emit("ctmc.json", dump({{"n", cfg_.n},
                            {"servers", servers},
                            {"control", to_json(u)},
                            {"cost", {{"mean", est.cost.mean}, {"half_width", est.cost.half_width}}},
                            {"scaled_queue", ests(est.scaled_queue)},
                            {"scaled_idle", ests(est.scaled_idle)},
                            {"scaled_total", {{"mean", est.scaled_total.mean}, {"half_width", est.scaled_total.half_width}}},
                            {"events", est.events},
                            {"fallback_fraction", est.fallback_fraction},
                            {"horizon", cc.horizon}}));
  }

  void solve_cmd() {
    if (cfg_.constrained && cfg_.fair) throw Error(ErrorCode::InvalidInput, "--constrained and --fair are exclusive");
    CostSpec spec = cost();
    GridSpec grid{cfg_.radius, cfg_.mesh, stabilizing_control(net())};
    HjbOptions opts;
    opts.threads = cfg_.threads;
    HjbSolution sol;
    json j;
    std::string mode = "ergodic";
    bool zeroed = false;
    if (cfg_.constrained || cfg_.fair) {
      if (!problem_.constraints) throw Error(ErrorCode::InvalidInput, "spec has no constraints section");
      zeroed = spec.i_weights.cwiseAbs().maxCoeff() > 0.0;
      spec.i_weights.setZero();
    }
    if (cfg_.constrained) {
      mode = "constrained";
      sol = solve_constrained(form(), spec, *problem_.constraints, grid, opts);
    } else if (cfg_.fair) {
      mode = "fair";
      if (!problem_.constraints->theta) throw Error(ErrorCode::InvalidInput, "fair mode needs constraints.theta");
      sol = solve_fair(form(), spec, *problem_.constraints->theta, grid, opts);
    } else {
      sol = solve_ergodic(form(), spec, grid, opts);
    }
    j["mode"] = mode;
    j["rho"] = sol.rho;
    j["converged"] = sol.converged;
    j["iterations"] = sol.iterations;
    j["residual"] = sol.residual;
    j["rho_history"] = sol.rho_history;
    j["grid"] = {{"dim", sol.grid.dim()},
                 {"radius", sol.grid.radius()},
                 {"h", sol.grid.h()},
                 {"per_axis", sol.grid.per_axis()},
                 {"cells", sol.grid.size()}};
    j["fallback"] = to_json(sol.fallback);
    if (mode != "ergodic") {
      j["multipliers"] = to_json(sol.multipliers.lam);
      j["constraint_values"] = to_json(sol.constraint_values);
      j["idleness_weights_zeroed"] = zeroed;
    }
    if (!cfg_.alpha.empty()) {
      Eigen::VectorXd a = parse_list(cfg_.alpha, "alpha");
      if (a.size() != 1) throw Error(ErrorCode::InvalidInput, "solve takes a single discount rate in --alpha");
      DiscountedSolution d = solve_discounted(form(), stage_cost(spec), grid, a(0), opts);
      j["discounted"] = {{"alpha", a(0)},
                         {"alpha_V0", a(0) * d.V(d.grid.origin())},
                         {"iterations", d.iterations},
                         {"converged", d.converged}};
    }
    j["values_file"] = "V.csv";
    emit("hjb_solution.json", dump(j));

    const int I = sol.grid.dim(), J = static_cast<int>(sol.fallback.us.size());
    std::string csv;
    for (int i = 0; i < I; ++i) csv += "x" + std::to_string(i + 1) + ",";
    csv += "V";
    for (int i = 0; i < I; ++i) csv += ",uc" + std::to_string(i + 1);
    for (int k = 0; k < J; ++k) csv += ",us" + std::to_string(k + 1);
    csv += "\n";
    for (long k = 0; k < sol.grid.size(); ++k) {
      std::vector<double> row;
      for (int i = 0; i < I; ++i) row.push_back(sol.grid.coord(k, i));
      row.push_back(sol.V(k));
      for (int r = 0; r < I + J; ++r) row.push_back(sol.policy(r, k));
      csv += csv_row(row);
    }
    emit("V.csv", csv);
  }

  RunConfig cfg_;
  std::chrono::steady_clock::time_point t0_;
  ProblemSpec problem_;
  std::uint64_t input_hash_ = 0;
  std::vector<std::string> outputs_;
  std::optional<Network> net_;
  std::optional<StaticPlan> plan_;
  std::optional<DriftForm> form_;
};

void report(ErrorCode code, const std::string& message) {
  json e = {{"error", std::string(to_string(code))}, {"code", static_cast<int>(code)}, {"message", message}};
  std::cerr << e.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  RunConfig cfg;
  CLI::App app{"Halfin-Whitt multiclass multi-pool control toolkit"};
  app.require_subcommand(1, 1);
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"validate", "check the network and list its leaves"},
      {"plan", "solve the static planning problem"},
      {"drift", "limiting drift in affine form"},
      {"gmap", "print Psi(alpha, beta) as CSV"},
      {"stability", "stabilizing control, Lyapunov certificate and cone diagnostics"},
      {"simulate", "ergodic cost of a constant control by Euler-Maruyama"},
      {"ctmc", "simulate the n-th pre-limit system"},
      {"solve", "ergodic HJB on a truncated grid"}};
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--spec", cfg.spec_path, "network JSON")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", cfg.out_dir, "output directory");
    sub->add_option("--set", cfg.overrides, "override key=value (1-based indices)");
    sub->add_option("--seed", cfg.seed);
    sub->add_option("--threads", cfg.threads);
    if (name == "gmap") {
      sub->add_option("--alpha", cfg.alpha, "comma-separated row sums")->required();
      sub->add_option("--beta", cfg.beta, "comma-separated column sums")->required();
    }
    if (name == "stability") sub->add_option("--m", cfg.m, "Lyapunov exponent");
    if (name == "simulate" || name == "ctmc") {
      sub->add_option("--horizon", cfg.horizon);
      sub->add_option("--uc", cfg.uc, "constant u^c, comma-separated");
      sub->add_option("--us", cfg.us, "constant u^s, comma-separated");
    }
    if (name == "simulate") {
      sub->add_option("--dt", cfg.dt);
      sub->add_option("--path-stride", cfg.path_stride, "write every k-th step to path.csv");
    }
    if (name == "ctmc") sub->add_option("--n", cfg.n, "scaling parameter");
    if (name == "solve") {
      sub->add_option("--radius", cfg.radius);
      sub->add_option("--mesh", cfg.mesh);
      sub->add_option("--alpha", cfg.alpha, "also solve the discounted problem at this rate");
      sub->add_flag("--constrained", cfg.constrained);
      sub->add_flag("--fair", cfg.fair);
    }
    sub->callback([&cfg, name = name] { cfg.command = name; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report(ErrorCode::InvalidInput, e.what());
    return static_cast<int>(ErrorCode::InvalidInput);
  }
  try {
    return Runner(cfg).run();
  } catch (const Error& e) {
    report(e.code(), e.what());
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    report(ErrorCode::Io, e.what());
    return static_cast<int>(ErrorCode::Io);
  }
}
