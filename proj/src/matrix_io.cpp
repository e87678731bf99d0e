#include "drsls/matrix_io.hpp"

#include <fstream>
#include <string>
#include <vector>

namespace drsls {

using nlohmann::json;

namespace {

std::string type_name(const json& j) { return j.type_name(); }

// Reads a flat numeric array into a matrix of the declared shape.
Eigen::MatrixXd matrix_from_flat(const json& j, const std::string& field,
                                 int rows, int cols) {
  if (!j.is_array())
    throw ConfigError("field \"" + field + "\" must be a numeric array, got " +
                      type_name(j));
  const auto expected = static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
  if (j.size() != expected)
    throw ConfigError("field \"" + field + "\" must have " +
                      std::to_string(expected) + " entries (" +
                      std::to_string(rows) + "x" + std::to_string(cols) +
                      " row-major), got " + std::to_string(j.size()));
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      const json& v = j[static_cast<std::size_t>(r) * cols + c];
      if (!v.is_number())
        throw ConfigError("field \"" + field + "\" entry " +
                          std::to_string(r * cols + c) + " is not a number");
      m(r, c) = v.get<double>();
    }
  return m;
}

json flat_rowmajor(const Eigen::MatrixXd& m) {
  json a = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) a.push_back(m(r, c));
  return a;
}

}  // namespace

const json& json_field(const json& j, const std::string& field) {
  // Only the last path segment is looked up; the full name is for messages.
  const auto dot = field.rfind('.');
  const std::string key = dot == std::string::npos ? field : field.substr(dot + 1);
  if (!j.is_object())
    throw ConfigError("expected an object around field \"" + field + "\", got " +
                      type_name(j));
  auto it = j.find(key);
  if (it == j.end()) throw ConfigError("missing field \"" + field + "\"");
  return *it;
}

double json_number(const json& j, const std::string& field) {
  const json& v = json_field(j, field);
  if (!v.is_number())
    throw ConfigError("field \"" + field + "\" must be a number, got " +
                      type_name(v));
  return v.get<double>();
}

double json_number_or(const json& j, const std::string& field, double fallback) {
  const auto dot = field.rfind('.');
  const std::string key = dot == std::string::npos ? field : field.substr(dot + 1);
  if (j.is_object() && j.contains(key)) return json_number(j, field);
  return fallback;
}

int json_int(const json& j, const std::string& field) {
  const json& v = json_field(j, field);
  if (!v.is_number_integer())
    throw ConfigError("field \"" + field + "\" must be an integer, got " +
                      type_name(v));
  return v.get<int>();
}

int json_int_or(const json& j, const std::string& field, int fallback) {
  const auto dot = field.rfind('.');
  const std::string key = dot == std::string::npos ? field : field.substr(dot + 1);
  if (j.is_object() && j.contains(key)) return json_int(j, field);
  return fallback;
}

std::vector<double> json_number_list(const json& j, const std::string& field) {
  const json& v = json_field(j, field);
  if (!v.is_array())
    throw ConfigError("field \"" + field + "\" must be an array, got " +
                      type_name(v));
  std::vector<double> out;
  out.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number())
      throw ConfigError("field \"" + field + "\" entry " + std::to_string(i) +
                        " is not a number");
    out.push_back(v[i].get<double>());
  }
  return out;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json j;
  j["rows"] = static_cast<int>(m.rows());
  j["cols"] = static_cast<int>(m.cols());
  j["data"] = flat_rowmajor(m);
  return j;
}

Eigen::MatrixXd matrix_from_json(const json& j, const std::string& field) {
  const json& mat = json_field(j, field);
  const int rows = json_int(mat, field + ".rows");
  const int cols = json_int(mat, field + ".cols");
  if (rows < 0 || cols < 0)
    throw ConfigError("field \"" + field + "\" has negative shape");
  if (rows == 0 || cols == 0) return Eigen::MatrixXd(rows, cols);
  return matrix_from_flat(json_field(mat, field + ".data"), field + ".data", rows,
                          cols);
}

json vector_to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Eigen::VectorXd vector_from_json(const json& j, const std::string& field) {
  const std::vector<double> vals = json_number_list(j, field);
  Eigen::VectorXd v(static_cast<Eigen::Index>(vals.size()));
  for (std::size_t i = 0; i < vals.size(); ++i) v[static_cast<Eigen::Index>(i)] = vals[i];
  return v;
}

json model_to_json(const InnovationModel& model) {
  json j;
  j["n"] = model.n();
  j["m"] = model.m();
  j["q"] = model.q();
  j["A"] = flat_rowmajor(model.A);
  j["B"] = flat_rowmajor(model.B);
  j["C"] = flat_rowmajor(model.C);
  j["D"] = flat_rowmajor(model.D);
  j["L"] = flat_rowmajor(model.L);
  return j;
}

InnovationModel model_from_json(const json& j) {
  const int n = json_int(j, "n");
  const int m = json_int(j, "m");
  const int q = json_int(j, "q");
  if (n < 1) throw ConfigError("field \"n\" must be at least 1");
  if (m < 1) throw ConfigError("field \"m\" must be at least 1");
  if (q < 1) throw ConfigError("field \"q\" must be at least 1");
  InnovationModel model;
  model.A = matrix_from_flat(json_field(j, "A"), "A", n, n);
  model.B = matrix_from_flat(json_field(j, "B"), "B", n, m);
  model.C = matrix_from_flat(json_field(j, "C"), "C", q, n);
  model.D = matrix_from_flat(json_field(j, "D"), "D", q, m);
  model.L = matrix_from_flat(json_field(j, "L"), "L", n, q);
  model.validate();
  return model;
}

json system_to_json(const TrueSystem& sys) {
  json j;
  j["model"] = model_to_json(sys.model);
  j["w_lower"] = vector_to_json(sys.w.lower);
  j["w_upper"] = vector_to_json(sys.w.upper);
  j["v_lower"] = vector_to_json(sys.v.lower);
  j["v_upper"] = vector_to_json(sys.v.upper);
  return j;
}

TrueSystem system_from_json(const json& j) {
  TrueSystem sys;
  sys.model = model_from_json(json_field(j, "model"));
  sys.w.lower = vector_from_json(j, "w_lower");
  sys.w.upper = vector_from_json(j, "w_upper");
  sys.v.lower = vector_from_json(j, "v_lower");
  sys.v.upper = vector_from_json(j, "v_upper");
  const auto check_interval = [](const DisturbanceSpec& d, int dim,
                                 const std::string& name) {
    if (d.lower.size() != dim || d.upper.size() != dim)
      throw ConfigError("fields \"" + name + "_lower\"/\"" + name +
                        "_upper\" must have length " + std::to_string(dim));
    for (int i = 0; i < dim; ++i)
      if (!(d.lower[i] <= d.upper[i]))
        throw ConfigError("field \"" + name + "_lower\" exceeds \"" + name +
                          "_upper\" at entry " + std::to_string(i));
  };
  check_interval(sys.w, sys.model.n(), "w");
  check_interval(sys.v, sys.model.q(), "v");
  return sys;
}

json innovation_draws_to_json(const InnovationDraws& draws, int T, int tau,
                              int q, int m) {
  json j;
  j["T"] = T;
  j["tau"] = tau;
  j["q"] = q;
  j["m"] = m;
  j["samples"] = matrix_to_json(draws.samples.e);
  json windows = json::array();
  for (const PastWindow& w : draws.windows) {
    json entry;
    entry["u_past"] = vector_to_json(w.u_past);
    entry["y_past"] = vector_to_json(w.y_past);
    windows.push_back(std::move(entry));
  }
  j["windows"] = std::move(windows);
  return j;
}

InnovationDraws innovation_draws_from_json(const json& j) {
  const int tau = json_int(j, "tau");
  const int q = json_int(j, "q");
  const int m = json_int(j, "m");
  InnovationDraws draws;
  draws.samples.e = matrix_from_json(j, "samples");
  const json& windows = json_field(j, "windows");
  if (!windows.is_array())
    throw ConfigError("field \"windows\" must be an array");
  if (static_cast<int>(windows.size()) != draws.samples.count())
    throw ConfigError("field \"windows\" must have one entry per sample column");
  for (std::size_t i = 0; i < windows.size(); ++i) {
    PastWindow w;
    const std::string name = "windows[" + std::to_string(i) + "]";
    w.u_past = vector_from_json(windows[i], name + ".u_past");
    w.y_past = vector_from_json(windows[i], name + ".y_past");
    if (w.u_past.size() != static_cast<Eigen::Index>(tau) * m ||
        w.y_past.size() != static_cast<Eigen::Index>(tau) * q)
      throw ConfigError("field \"" + name + "\" lengths do not match tau*m / tau*q");
    draws.windows.push_back(std::move(w));
  }
  return draws;
}

json synthesis_result_to_json(const SynthesisResult& result) {
  json j;
  j["status"] = lp::to_string(result.status);
  j["objective"] = result.objective;
  j["epsilon_bar"] = result.epsilon_bar;
  j["rho"] = result.rho;
  j["sigma"] = result.sigma;
  j["iterations"] = result.iterations;
  j["max_residual"] = result.max_residual;
  j["subspace_residual"] = result.subspace_residual;
  json param;
  param["Phi_y"] = matrix_to_json(result.param.Phi_y);
  param["Phi_u"] = matrix_to_json(result.param.Phi_u);
  param["phi_y"] = vector_to_json(result.param.phi_y);
  param["phi_u"] = vector_to_json(result.param.phi_u);
  j["param"] = std::move(param);
  json policy;
  policy["K"] = matrix_to_json(result.policy.K);
  policy["p"] = vector_to_json(result.policy.p);
  j["policy"] = std::move(policy);
  j["s"] = vector_to_json(result.s);
  if (!result.table.empty()) {
    json table = json::array();
    for (const GridEntry& entry : result.table) {
      json row;
      row["rho"] = entry.rho;
      row["sigma"] = entry.sigma;
      row["status"] = lp::to_string(entry.status);
      row["objective"] = entry.objective;
      row["epsilon_bar"] = entry.epsilon_bar;
      table.push_back(std::move(row));
    }
    j["grid"] = std::move(table);
  }
  return j;
}

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open \"" + path + "\" for reading");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("cannot parse \"" + path + "\": " + e.what());
  }
}

void save_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open \"" + path + "\" for writing");
  out << j.dump(2) << "\n";
  if (!out) throw ConfigError("write to \"" + path + "\" failed");
}

}  // namespace drsls
