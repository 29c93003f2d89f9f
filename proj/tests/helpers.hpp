#pragma once

#include <string>
#include <tuple>
#include <vector>

#include "hwctrl/drift_form.hpp"
#include "hwctrl/io.hpp"
#include "hwctrl/network.hpp"
#include "hwctrl/static_plan.hpp"

namespace testing {

inline std::string spec_path(const std::string& name) { return std::string(HWCTRL_SPEC_DIR) + "/" + name + ".json"; }

inline hwctrl::ProblemSpec load(const std::string& name) { return hwctrl::load_problem(spec_path(name)); }

inline hwctrl::ProblemSpec load(const std::string& name, const std::vector<std::string>& overrides) {
  hwctrl::json doc = hwctrl::read_json_file(spec_path(name));
  for (const auto& o : overrides) hwctrl::apply_override(doc, o);
  return hwctrl::parse_problem(doc);
}

/// Network with unit arrival and abandonment rates; edges given as 1-based (class, pool, mu).
inline hwctrl::NetworkSpec make_spec(int I, int J, const std::vector<std::tuple<int, int, double>>& edges,
                                     double lambda = 1.0, double gamma = 1.0) {
  hwctrl::NetworkSpec s;
  s.classes.assign(I, {lambda, 0.0, gamma});
  s.nu.assign(J, 1.0);
  for (auto [i, j, mu] : edges) s.edges.push_back({i, j, mu, 0.0});
  return s;
}

struct Model {
  hwctrl::Network net;
  hwctrl::StaticPlan plan;
  hwctrl::DriftForm form;
};

inline Model build(const hwctrl::NetworkSpec& spec) {
  Model m{hwctrl::validate_network(spec), {}, {}};
  m.plan = hwctrl::solve_static_plan(m.net);
  m.form = hwctrl::extract_drift_form(m.net, m.plan);
  return m;
}

inline std::vector<std::pair<int, int>> edge_list(const hwctrl::Network& net) {
  std::vector<std::pair<int, int>> out;
  for (const auto& e : net.edges) out.emplace_back(e.cls, e.pool);
  return out;
}

}  // namespace testing
