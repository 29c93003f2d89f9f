#include "hwctrl/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "hwctrl/error.hpp"

namespace hwctrl {

namespace {

double number_or(const json& obj, const char* key, double fallback) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return fallback;
  if (!it->is_number()) throw Error(ErrorCode::InvalidInput, std::string("field '") + key + "' must be a number");
  return it->get<double>();
}

const json& require(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) throw Error(ErrorCode::InvalidInput, std::string("missing field '") + key + "'");
  return *it;
}

}  // namespace

ProblemSpec parse_problem(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidInput, "spec must be a JSON object");
  ProblemSpec out;
  try {
    for (const auto& c : require(j, "classes"))
      out.network.classes.push_back(
          {number_or(c, "lambda", 0.0), number_or(c, "lambda_hat", 0.0), number_or(c, "gamma", 0.0)});
    for (const auto& p : require(j, "pools")) out.network.nu.push_back(number_or(p, "nu", 0.0));
    for (const auto& e : require(j, "edges"))
      out.network.edges.push_back({require(e, "class").get<int>(), require(e, "pool").get<int>(),
                                   number_or(e, "mu", 0.0), number_or(e, "mu_hat", 0.0)});
    if (auto it = j.find("cost"); it != j.end()) {
      CostSpec c;
      c.q_weights = vector_from_json(require(*it, "q_weights"));
      c.i_weights = it->contains("i_weights") ? vector_from_json((*it)["i_weights"])
                                              : Eigen::VectorXd::Zero(static_cast<int>(out.network.nu.size()));
      c.m = number_or(*it, "m", 1.0);
      out.cost = c;
    }
    if (auto it = j.find("constraints"); it != j.end()) {
      ConstraintSpec c;
      c.delta = vector_from_json(require(*it, "delta"));
      if (it->contains("theta") && !(*it)["theta"].is_null()) c.theta = vector_from_json((*it)["theta"]);
      out.constraints = c;
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidInput, e.what());
  }
  return out;
}

json to_json(const ProblemSpec& spec) {
  json j;
  j["classes"] = json::array();
  for (const auto& c : spec.network.classes)
    j["classes"].push_back({{"lambda", c.lambda}, {"lambda_hat", c.lambda_hat}, {"gamma", c.gamma}});
  j["pools"] = json::array();
  for (double nu : spec.network.nu) j["pools"].push_back({{"nu", nu}});
  j["edges"] = json::array();
  for (const auto& e : spec.network.edges)
    j["edges"].push_back({{"class", e.cls}, {"pool", e.pool}, {"mu", e.mu}, {"mu_hat", e.mu_hat}});
  if (spec.cost)
    j["cost"] = {{"q_weights", to_json(spec.cost->q_weights)},
                 {"i_weights", to_json(spec.cost->i_weights)},
                 {"m", spec.cost->m}};
  if (spec.constraints) {
    j["constraints"] = {{"delta", to_json(spec.constraints->delta)}};
    if (spec.constraints->theta) j["constraints"]["theta"] = to_json(*spec.constraints->theta);
  }
  return j;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidInput, path + ": " + e.what());
  }
}

ProblemSpec load_problem(const std::string& path) { return parse_problem(read_json_file(path)); }

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  out << text;
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path);
}

void apply_override(json& doc, const std::string& assignment) {
  auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw Error(ErrorCode::InvalidInput, "override must be key=value");
  std::string path = assignment.substr(0, eq);
  std::string text = assignment.substr(eq + 1);

  json* node = &doc;
  std::stringstream ss(path);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const std::string& key = parts[k];
    bool last = k + 1 == parts.size();
    if (node->is_array()) {
      std::size_t idx = 0;
      auto [p, ec] = std::from_chars(key.data(), key.data() + key.size(), idx);
      if (ec != std::errc() || p != key.data() + key.size() || idx < 1 || idx > node->size())
        throw Error(ErrorCode::InvalidInput, "bad index '" + key + "' in override " + path);
      node = &(*node)[idx - 1];
    } else {
      if (!last && !node->contains(key)) throw Error(ErrorCode::InvalidInput, "unknown key '" + key + "' in " + path);
      node = &(*node)[key];
    }
  }
  try {
    *node = json::parse(text);
  } catch (const json::exception&) {
    *node = text;
  }
}

json to_json(const Eigen::VectorXd& v) {
  json j = json::array();
  for (int i = 0; i < v.size(); ++i) j.push_back(v(i));
  return j;
}

json to_json(const Eigen::MatrixXd& m) {
  json j = json::array();
  for (int r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    j.push_back(row);
  }
  return j;
}

Eigen::VectorXd vector_from_json(const json& j) {
  if (!j.is_array()) throw Error(ErrorCode::InvalidInput, "expected an array of numbers");
  Eigen::VectorXd v(static_cast<int>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(i) = j[i].get<double>();
  return v;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  if (!j.is_array()) throw Error(ErrorCode::InvalidInput, "expected an array of rows");
  const int rows = static_cast<int>(j.size());
  const int cols = rows ? static_cast<int>(j[0].size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    if (static_cast<int>(j[r].size()) != cols) throw Error(ErrorCode::ShapeMismatch, "ragged matrix");
    for (int c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

json to_json(const ControlPoint& u) { return {{"uc", to_json(u.uc)}, {"us", to_json(u.us)}}; }

ControlPoint control_from_json(const json& j) {
  return {vector_from_json(require(j, "uc")), vector_from_json(require(j, "us"))};
}

json to_json(const StaticPlan& plan, const Network& net) {
  json labels = json::array();
  for (const Edge& e : net.edges) labels.push_back({e.cls + 1, e.pool + 1});
  return {{"xi_star", to_json(plan.xi_star)}, {"rho_star", plan.rho_star}, {"x_star", to_json(plan.x_star)},
          {"z_star", to_json(plan.z_star)},   {"ell", to_json(plan.ell)},     {"edges", labels}};
}

json to_json(const DriftForm& form) {
  json perm = json::array();
  for (int k : form.perm) perm.push_back(k + 1);
  return {{"B1", to_json(form.B1)},   {"B2", to_json(form.B2)},       {"gamma", to_json(form.gamma)},
          {"ell", to_json(form.ell)}, {"sigma", to_json(form.sigma)}, {"perm", perm}};
}

json to_json(const StabilityCertificate& cert) {
  return {{"u_bar", to_json(cert.u_bar)}, {"Q", to_json(cert.q)},           {"m", cert.m},
          {"kappa0", cert.kappa0},        {"kappa1", cert.kappa1},          {"c_min", cert.c_min}};
}

std::string format_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, p);
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

}  // namespace hwctrl
