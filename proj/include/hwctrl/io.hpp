#pragma once

#include <Eigen/Dense>
#include <json.hpp>
#include <optional>
#include <string>

#include "hwctrl/costs.hpp"
#include "hwctrl/drift_form.hpp"
#include "hwctrl/network.hpp"
#include "hwctrl/stability.hpp"
#include "hwctrl/static_plan.hpp"

namespace hwctrl {

using json = nlohmann::ordered_json;

/// Everything a spec file carries.
struct ProblemSpec {
  NetworkSpec network;
  std::optional<CostSpec> cost;
  std::optional<ConstraintSpec> constraints;
};

ProblemSpec parse_problem(const json& j);
ProblemSpec load_problem(const std::string& path);
json to_json(const ProblemSpec& spec);

/// Applies a flat override such as "classes.2.lambda=1.5" or "cost.m=2" (1-based array indices).
void apply_override(json& doc, const std::string& assignment);

json read_json_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

/// Full-precision serialization helpers.
json to_json(const Eigen::VectorXd& v);
json to_json(const Eigen::MatrixXd& m);  // row-major array of rows
Eigen::VectorXd vector_from_json(const json& j);
Eigen::MatrixXd matrix_from_json(const json& j);

json to_json(const ControlPoint& u);
ControlPoint control_from_json(const json& j);
json to_json(const StaticPlan& plan, const Network& net);
json to_json(const DriftForm& form);
json to_json(const StabilityCertificate& cert);

/// 17 significant digits, so doubles round-trip.
std::string format_double(double v);
std::string dump(const json& j);

}  // namespace hwctrl
