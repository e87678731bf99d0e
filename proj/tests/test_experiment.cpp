#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <Eigen/Dense>
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "drsls/experiment.hpp"
#include "drsls/matrix_io.hpp"
#include "drsls/rng.hpp"
#include "test_util.hpp"

using namespace drsls;
using nlohmann::json;

namespace {

namespace fs = std::filesystem;

// Fresh scratch directory per case; everything lands under the build tree.
fs::path scratch_dir(const std::string& name) {
  fs::path dir = fs::path("test_experiment_tmp") / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

template <typename A, typename B>
bool bits_equal(const A& a, const B& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  return (a.array() == b.array()).all();
}

TrueSystem small_system(double amp = 0.01) {
  TrueSystem sys;
  sys.model = testutil::benchmark_model();
  sys.w = DisturbanceSpec::symmetric(2, amp);
  sys.v = DisturbanceSpec::symmetric(1, amp);
  return sys;
}

json small_config_doc() {
  json cfg;
  cfg["system"] = system_to_json(small_system());
  cfg["T"] = 6;
  cfg["tau"] = 10;
  cfg["N"] = 8;
  cfg["M"] = 2;
  cfg["budget"] = {{"gamma1", 0.05}, {"gamma2", 0.05}, {"gamma3", 0.05},
                   {"kappa", 0.005}};
  cfg["rho_grid"] = {0.1};
  cfg["sigma_grid"] = {2.0};
  cfg["constraints"] = {{"y_min", -0.5}, {"u_max", 1.0}};
  cfg["perturb_scale"] = 0.002;
  cfg["seed"] = 99;
  return cfg;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("matrices and vectors round-trip through text at full precision") {
  RngStream rng(41);
  Eigen::MatrixXd m = rng.uniform_matrix(5, 3, -2.0, 2.0);
  m(0, 0) = 1.0 / 3.0;
  m(1, 2) = 1e-17;
  m(2, 1) = -12345.678901234567;
  m(4, 0) = 0.0;
  json holder;
  holder["m"] = json::parse(matrix_to_json(m).dump());
  const Eigen::MatrixXd back = matrix_from_json(holder, "m");
  CHECK(bits_equal(m, back));

  Eigen::VectorXd v = rng.uniform_vector(9, -1.0, 1.0);
  holder["v"] = json::parse(vector_to_json(v).dump());
  CHECK(bits_equal(v, vector_from_json(holder, "v")));

  holder["e"] = matrix_to_json(Eigen::MatrixXd(0, 3));
  CHECK(matrix_from_json(holder, "e").rows() == 0);
  CHECK(matrix_from_json(holder, "e").cols() == 3);
}

TEST_CASE("model documents round-trip and reject malformed fields") {
  const InnovationModel model = testutil::benchmark_model();
  json doc = json::parse(model_to_json(model).dump());
  const InnovationModel back = model_from_json(doc);
  CHECK(bits_equal(model.A, back.A));
  CHECK(bits_equal(model.B, back.B));
  CHECK(bits_equal(model.C, back.C));
  CHECK(bits_equal(model.D, back.D));
  CHECK(bits_equal(model.L, back.L));

  json missing = doc;
  missing.erase("A");
  CHECK_THROWS_WITH_AS(model_from_json(missing), doctest::Contains("\"A\""),
                       ConfigError);

  json short_b = doc;
  short_b["B"] = {0.1};
  CHECK_THROWS_WITH_AS(model_from_json(short_b), doctest::Contains("\"B\""),
                       ConfigError);

  json bad_entry = doc;
  bad_entry["C"][0] = "zero";
  CHECK_THROWS_WITH_AS(model_from_json(bad_entry), doctest::Contains("\"C\""),
                       ConfigError);

  json bad_dim = doc;
  bad_dim["n"] = 0;
  CHECK_THROWS_WITH_AS(model_from_json(bad_dim), doctest::Contains("\"n\""),
                       ConfigError);
}

TEST_CASE("system documents carry the noise intervals") {
  const TrueSystem sys = small_system(0.25);
  json doc = json::parse(system_to_json(sys).dump());
  const TrueSystem back = system_from_json(doc);
  CHECK(bits_equal(back.model.A, sys.model.A));
  CHECK(bits_equal(back.w.lower, sys.w.lower));
  CHECK(bits_equal(back.v.upper, sys.v.upper));

  json flipped = doc;
  flipped["w_lower"][0] = 1.0;
  CHECK_THROWS_WITH_AS(system_from_json(flipped), doctest::Contains("w_lower"),
                       ConfigError);

  json short_v = doc;
  short_v["v_upper"] = json::array();
  CHECK_THROWS_WITH_AS(system_from_json(short_v), doctest::Contains("v_"),
                       ConfigError);
}

TEST_CASE("innovation draws round-trip with their windows") {
  const TrueSystem sys = small_system();
  RngStream rng(7);
  const InnovationDraws draws = generate_innovation_samples(sys, 4, 6, 5, rng);
  const json doc = json::parse(
      innovation_draws_to_json(draws, 4, 6, 1, 1).dump());
  const InnovationDraws back = innovation_draws_from_json(doc);
  CHECK(bits_equal(back.samples.e, draws.samples.e));
  REQUIRE(back.windows.size() == draws.windows.size());
  for (std::size_t i = 0; i < draws.windows.size(); ++i) {
    CHECK(bits_equal(back.windows[i].u_past, draws.windows[i].u_past));
    CHECK(bits_equal(back.windows[i].y_past, draws.windows[i].y_past));
  }

  json mismatched = doc;
  mismatched["windows"].erase(0);
  CHECK_THROWS_AS(innovation_draws_from_json(mismatched), ConfigError);
}

TEST_CASE("config parsing applies defaults and names offending fields") {
  json minimal;
  minimal["system"] = system_to_json(small_system());
  const ExperimentConfig cfg = experiment_config_from_json(minimal, "");
  CHECK(cfg.T == 15);
  CHECK(cfg.tau == 25);
  CHECK(cfg.N == 100);
  CHECK(cfg.M == 50);
  CHECK(cfg.budget.gamma1 == 0.0);
  CHECK(cfg.y_weight == 1.0);
  CHECK(cfg.u_weight == 0.1);
  CHECK(cfg.y_min == -0.01);
  CHECK(cfg.u_max == 1.0);
  CHECK(cfg.nominal_mode == NominalMode::mean_certainty_equivalent);
  CHECK(cfg.seed == 1);
  CHECK(cfg.echo == minimal);

  json bad = small_config_doc();
  bad["rho_grid"] = {0.1, 1.2};
  CHECK_THROWS_WITH_AS(experiment_config_from_json(bad, ""),
                       doctest::Contains("rho_grid"), ConfigError);

  bad = small_config_doc();
  bad["budget"]["gamma2"] = -0.1;
  CHECK_THROWS_WITH_AS(experiment_config_from_json(bad, ""),
                       doctest::Contains("budget.gamma2"), ConfigError);

  bad = small_config_doc();
  bad["nominal_mode"] = "plugin";
  CHECK_THROWS_WITH_AS(experiment_config_from_json(bad, ""),
                       doctest::Contains("nominal_mode"), ConfigError);

  bad = small_config_doc();
  bad["T"] = 0;
  CHECK_THROWS_WITH_AS(experiment_config_from_json(bad, ""),
                       doctest::Contains("\"T\""), ConfigError);

  bad = small_config_doc();
  bad["seed"] = -4;
  CHECK_THROWS_WITH_AS(experiment_config_from_json(bad, ""),
                       doctest::Contains("seed"), ConfigError);

  bad = small_config_doc();
  bad["sigma_grid"] = json::array();
  CHECK_THROWS_WITH_AS(experiment_config_from_json(bad, ""),
                       doctest::Contains("sigma_grid"), ConfigError);

  CHECK_THROWS_WITH_AS(experiment_config_from_json(json::object(), ""),
                       doctest::Contains("system"), ConfigError);
}

TEST_CASE("config loading resolves the system file next to the config") {
  const fs::path dir = scratch_dir("load");
  save_json_file((dir / "plant.json").string(), system_to_json(small_system()));
  json cfg_doc = small_config_doc();
  cfg_doc.erase("system");
  cfg_doc["system_file"] = "plant.json";
  save_json_file((dir / "config.json").string(), cfg_doc);

  const ExperimentConfig cfg = load_experiment_config((dir / "config.json").string());
  CHECK(bits_equal(cfg.sys.model.A, testutil::benchmark_model().A));
  CHECK(cfg.T == 6);
  CHECK(cfg.seed == 99);

  CHECK_THROWS_WITH_AS(load_experiment_config((dir / "missing.json").string()),
                       doctest::Contains("missing.json"), ConfigError);

  std::ofstream((dir / "broken.json").string()) << "{ not json";
  CHECK_THROWS_WITH_AS(load_experiment_config((dir / "broken.json").string()),
                       doctest::Contains("broken.json"), ConfigError);
}

TEST_CASE("synthesis results serialize with their grid table") {
  const ExperimentConfig cfg = experiment_config_from_json(small_config_doc(), "");
  const StackedOperators ops = stacked_operators(cfg.sys.model, cfg.T);
  RngStream erng = RngStream::derive(cfg.seed, RngPurpose::innovation_samples, 0);
  const InnovationDraws draws =
      generate_innovation_samples(cfg.sys, cfg.T, cfg.tau, cfg.N, erng);
  RngStream wrng = RngStream::derive(cfg.seed, RngPurpose::warmup, 0);
  const WarmupState start = warmup_window(cfg.sys, cfg.tau, wrng);
  const Eigen::VectorXd y0 =
      window_free_response(cfg.sys.model, cfg.T, cfg.tau, start.window);
  const SynthesisResult res =
      grid_search(ops, y0, draws.samples, cfg.budget, {0.1, 0.2}, {2.0},
                  cfg.cost(), cfg.constraints());
  REQUIRE(res.status == lp::SolveStatus::optimal);

  const json doc = synthesis_result_to_json(res);
  CHECK(doc.at("status") == "optimal");
  CHECK(doc.at("objective").get<double>() == doctest::Approx(res.objective));
  CHECK(doc.at("epsilon_bar").get<double>() == res.epsilon_bar);
  CHECK(doc.at("grid").size() == res.table.size());
  const Eigen::MatrixXd K = matrix_from_json(doc.at("policy"), "policy.K");
  CHECK(bits_equal(K, res.policy.K));
  const Eigen::MatrixXd Phi_u = matrix_from_json(doc.at("param"), "param.Phi_u");
  CHECK(bits_equal(Phi_u, res.param.Phi_u));
}

TEST_CASE("metrics rows print as a fixed-header csv") {
  MetricsRow a;
  a.draw_id = 0;
  a.method = "nominal";
  a.open_loop_cost = 1.5;
  a.closed_loop_cost = 2.25;
  a.violation_ratio_steps = 0.25;
  a.violated = true;
  a.status = "optimal";
  MetricsRow b;
  b.draw_id = 0;
  b.method = "drsls";
  b.open_loop_cost = 0.5;
  b.closed_loop_cost = 0.5;
  b.status = "optimal";
  b.epsilon_bar = 0.125;
  b.rho = 0.1;
  b.sigma = 2.0;

  const std::string text = metrics_csv({a, b});
  const std::string expected =
      "draw_id,method,open_loop_cost,closed_loop_cost,violation_ratio_steps,"
      "violated,status,epsilon_bar,rho,sigma\n"
      "0,nominal,1.5,2.25,0.25,1,optimal,0,0,0\n"
      "0,drsls,0.5,0.5,0,0,optimal,0.125,0.10000000000000001,2\n";
  CHECK(text == expected);
}

TEST_CASE("summaries aggregate the solved rows per method") {
  MonteCarloResult result;
  for (int d = 0; d < 3; ++d) {
    DrawResult dr;
    dr.nominal_row.draw_id = d;
    dr.nominal_row.method = "nominal";
    dr.nominal_row.status = d == 2 ? "infeasible" : "optimal";
    dr.nominal_row.open_loop_cost = 1.0 + d;
    dr.nominal_row.closed_loop_cost = 10.0 * (d + 1);
    dr.nominal_row.violated = d == 0;
    dr.drsls_row.draw_id = d;
    dr.drsls_row.method = "drsls";
    dr.drsls_row.status = "optimal_clipped";
    dr.drsls_row.open_loop_cost = 2.0;
    dr.drsls_row.closed_loop_cost = 4.0 + d;
    dr.drsls_row.epsilon_bar = 0.5;
    result.draws.push_back(dr);
  }
  const json s = summary_json(result);
  const json& nom = s.at("methods").at("nominal");
  CHECK(nom.at("rows") == 3);
  CHECK(nom.at("solved") == 2);
  CHECK(nom.at("violated") == 1);
  CHECK(nom.at("open_loop_cost_mean").get<double>() == doctest::Approx(1.5));
  CHECK(nom.at("closed_loop_cost_median").get<double>() == doctest::Approx(15.0));
  const json& rob = s.at("methods").at("drsls");
  CHECK(rob.at("solved") == 3);
  CHECK(rob.at("clipped") == 3);
  CHECK(rob.at("closed_loop_cost_median").get<double>() == doctest::Approx(5.0));
  CHECK(rob.at("epsilon_bar_mean").get<double>() == doctest::Approx(0.5));
}

TEST_CASE("sample-innovations writes the draws with the config echoed") {
  const fs::path dir = scratch_dir("samples");
  json doc = small_config_doc();
  doc["out_dir"] = (dir / "out").string();
  const ExperimentConfig cfg = experiment_config_from_json(doc, "");
  std::ostringstream report;
  CHECK(cmd_sample_innovations(cfg, report) == 0);
  CHECK(report.str().find("samples: 8") != std::string::npos);

  const json stored = load_json_file((dir / "out" / "samples.json").string());
  CHECK(stored.at("config") == doc);
  const InnovationDraws back = innovation_draws_from_json(stored);
  CHECK(back.samples.count() == 8);
  CHECK(back.windows.size() == 8);

  RngStream rng = RngStream::derive(cfg.seed, RngPurpose::innovation_samples, 0);
  const InnovationDraws fresh =
      generate_innovation_samples(cfg.sys, cfg.T, cfg.tau, cfg.N, rng);
  CHECK(bits_equal(back.samples.e, fresh.samples.e));
}

TEST_CASE("synth writes result and policy files for both modes") {
  const fs::path dir = scratch_dir("synth");
  json doc = small_config_doc();
  doc["out_dir"] = (dir / "robust").string();
  ExperimentConfig cfg = experiment_config_from_json(doc, "");

  std::ostringstream report;
  CHECK(cmd_synth(cfg, SynthMode::drsls, report) == 0);
  CHECK(report.str().find("status: optimal") != std::string::npos);

  const json res = load_json_file((dir / "robust" / "result.json").string());
  CHECK(res.at("mode") == "drsls");
  CHECK(res.at("status") == "optimal");
  CHECK(res.at("epsilon_bar").get<double>() > 0.0);
  CHECK(res.at("config") == doc);
  const json pol = load_json_file((dir / "robust" / "policy.json").string());
  const Eigen::MatrixXd K = matrix_from_json(pol, "K");
  CHECK(K.rows() == (cfg.T + 1) * 1);
  CHECK(K.cols() == (cfg.T + 1) * 1);

  cfg.out_dir = (dir / "nominal").string();
  std::ostringstream nominal_report;
  CHECK(cmd_synth(cfg, SynthMode::nominal, nominal_report) == 0);
  const json nres = load_json_file((dir / "nominal" / "result.json").string());
  CHECK(nres.at("mode") == "nominal");
  CHECK(nres.at("epsilon_bar").get<double>() == 0.0);
  CHECK(nres.at("objective").get<double>() <= res.at("objective").get<double>());
}

TEST_CASE("montecarlo writes byte-identical outputs for a repeated run") {
  const fs::path dir = scratch_dir("mc");
  json doc = small_config_doc();
  doc["write_trajectories"] = true;

  doc["out_dir"] = (dir / "a").string();
  std::ostringstream ra;
  CHECK(cmd_montecarlo(experiment_config_from_json(doc, ""), ra) == 0);

  doc["out_dir"] = (dir / "b").string();
  std::ostringstream rb;
  CHECK(cmd_montecarlo(experiment_config_from_json(doc, ""), rb) == 0);

  const std::string csv_a = slurp(dir / "a" / "metrics.csv");
  const std::string csv_b = slurp(dir / "b" / "metrics.csv");
  CHECK(csv_a == csv_b);
  CHECK(csv_a.rfind("draw_id,method,", 0) == 0);
  CHECK(std::count(csv_a.begin(), csv_a.end(), '\n') == 1 + 2 * 2);

  const std::string traj_a = slurp(dir / "a" / "trajectories.csv");
  const std::string traj_b = slurp(dir / "b" / "trajectories.csv");
  CHECK(traj_a == traj_b);
  CHECK(traj_a.rfind("draw_id,method,t,signal,value", 0) == 0);

  const json sum = load_json_file((dir / "a" / "summary.json").string());
  CHECK(sum.at("draws") == 2);
  CHECK(sum.at("methods").at("nominal").at("rows") == 2);
  CHECK(sum.at("methods").at("drsls").at("rows") == 2);
}

TEST_CASE("validate passes on a healthy configuration and flags a short tau") {
  json doc = small_config_doc();
  doc["out_dir"] = scratch_dir("validate").string();
  std::ostringstream report;
  CHECK(cmd_validate(experiment_config_from_json(doc, ""), report) == 0);
  const std::string text = report.str();
  CHECK(text.find("round trip: pass") != std::string::npos);
  CHECK(text.find("mismatch response: pass") != std::string::npos);
  CHECK(text.find("term bounds: pass") != std::string::npos);
  CHECK(text.find("all suites passed") != std::string::npos);
  CHECK(text.find("warning") != std::string::npos);  // tau = 10 tail > 1e-6

  doc["decay_threshold"] = 1.0;
  std::ostringstream quiet;
  CHECK(cmd_validate(experiment_config_from_json(doc, ""), quiet) == 0);
  CHECK(quiet.str().find("warning") == std::string::npos);
}
