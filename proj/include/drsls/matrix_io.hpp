#pragma once

#include <json.hpp>

#include <string>

#include "drsls/dro_synthesis.hpp"
#include "drsls/lti_model.hpp"
#include "drsls/sim_harness.hpp"

namespace drsls {

// Raised for anything wrong with a document or config: missing fields,
// bad shapes, values out of range. The message always names the field.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Field accessors that throw ConfigError naming the offending field. Pass
// dotted names ("budget.gamma1") when reading nested documents so the
// message points at the right place.
const nlohmann::json& json_field(const nlohmann::json& j, const std::string& field);
double json_number(const nlohmann::json& j, const std::string& field);
double json_number_or(const nlohmann::json& j, const std::string& field, double fallback);
int json_int(const nlohmann::json& j, const std::string& field);
int json_int_or(const nlohmann::json& j, const std::string& field, int fallback);
std::vector<double> json_number_list(const nlohmann::json& j, const std::string& field);

// Matrices travel as {"rows": r, "cols": c, "data": [row-major]}, vectors as
// plain arrays. Doubles are written with enough digits to round-trip. The
// readers take the containing object plus the field name, so messages can
// point at the matrix that failed.
nlohmann::json matrix_to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, const std::string& field);

nlohmann::json vector_to_json(const Eigen::VectorXd& v);
Eigen::VectorXd vector_from_json(const nlohmann::json& j, const std::string& field);

// Model documents are flat: n, m, q plus row-major arrays A, B, C, D, L
// whose lengths must match the declared dimensions.
nlohmann::json model_to_json(const InnovationModel& model);
InnovationModel model_from_json(const nlohmann::json& j);

// A model plus its noise intervals: {"model": {...}, "w_lower": [...],
// "w_upper": [...], "v_lower": [...], "v_upper": [...]}.
nlohmann::json system_to_json(const TrueSystem& sys);
TrueSystem system_from_json(const nlohmann::json& j);

// Innovation samples with the window each one trailed: dimensions plus the
// sample matrix and one {u_past, y_past} object per draw.
nlohmann::json innovation_draws_to_json(const InnovationDraws& draws, int T,
                                        int tau, int q, int m);
InnovationDraws innovation_draws_from_json(const nlohmann::json& j);

// Status, objective, radius, response maps, policy, and the grid table (when
// the result came from a sweep). Diagnostics fields ride along so a stored
// result can be audited without re-solving.
nlohmann::json synthesis_result_to_json(const SynthesisResult& result);

// File helpers; both throw ConfigError with the path in the message.
nlohmann::json load_json_file(const std::string& path);
void save_json_file(const std::string& path, const nlohmann::json& j);

}  // namespace drsls
