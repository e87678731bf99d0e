#include "drsls/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "drsls/norms.hpp"
#include "drsls/rng.hpp"

namespace drsls {

using nlohmann::json;

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::uint64_t json_u64_or(const json& j, const std::string& field,
                          std::uint64_t fallback) {
  if (!j.is_object() || !j.contains(field)) return fallback;
  const json& v = j.at(field);
  if (!v.is_number_integer() && !v.is_number_unsigned())
    throw ConfigError("field \"" + field + "\" must be a non-negative integer");
  if (v.is_number_integer() && v.get<std::int64_t>() < 0)
    throw ConfigError("field \"" + field + "\" must be a non-negative integer");
  return v.get<std::uint64_t>();
}

bool json_bool_or(const json& j, const std::string& field, bool fallback) {
  if (!j.is_object() || !j.contains(field)) return fallback;
  const json& v = j.at(field);
  if (!v.is_boolean())
    throw ConfigError("field \"" + field + "\" must be a boolean");
  return v.get<bool>();
}

std::string json_string_or(const json& j, const std::string& field,
                           const std::string& fallback) {
  if (!j.is_object() || !j.contains(field)) return fallback;
  const json& v = j.at(field);
  if (!v.is_string())
    throw ConfigError("field \"" + field + "\" must be a string");
  return v.get<std::string>();
}

NominalMode mode_from_string(const std::string& s, const std::string& field) {
  if (s == "sample_average") return NominalMode::sample_average;
  if (s == "mean_certainty_equivalent") return NominalMode::mean_certainty_equivalent;
  throw ConfigError("field \"" + field +
                    "\" must be \"sample_average\" or "
                    "\"mean_certainty_equivalent\", got \"" + s + "\"");
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::nan("");
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double median_of(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

void ensure_out_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec)
    throw ConfigError("cannot create output directory \"" + dir + "\": " +
                      ec.message());
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open \"" + path + "\" for writing");
  out << text;
  if (!out) throw ConfigError("write to \"" + path + "\" failed");
}

std::string out_path(const ExperimentConfig& cfg, const std::string& name) {
  return (std::filesystem::path(cfg.out_dir) / name).string();
}

// Shared setup of the one-shot commands: innovation samples, a warm-up
// window, and the lifted operators of the (true) model.
struct ProblemSetup {
  InnovationDraws draws;
  WarmupState start;
  StackedOperators ops;
  Eigen::VectorXd y0;
};

ProblemSetup prepare_problem(const ExperimentConfig& cfg) {
  cfg.sys.validate(cfg.tau);
  ProblemSetup p;
  RngStream erng = RngStream::derive(cfg.seed, RngPurpose::innovation_samples, 0);
  p.draws = generate_innovation_samples(cfg.sys, cfg.T, cfg.tau, cfg.N, erng);
  RngStream wrng = RngStream::derive(cfg.seed, RngPurpose::warmup, 0);
  p.start = warmup_window(cfg.sys, cfg.tau, wrng, cfg.window_floor,
                          cfg.window_floor_steps, cfg.window_max_tries);
  p.ops = stacked_operators(cfg.sys.model, cfg.T);
  p.y0 = window_free_response(cfg.sys.model, cfg.T, cfg.tau, p.start.window);
  return p;
}

// Random strictly causal policy for the self-check suites.
AffinePolicy random_policy(int T, int q, int m, RngStream& rng) {
  AffinePolicy pol;
  pol.T = T;
  pol.q = q;
  pol.m = m;
  pol.K = Eigen::MatrixXd::Zero((T + 1) * m, (T + 1) * q);
  for (int t = 1; t <= T; ++t)
    for (int k = 0; k < t; ++k)
      pol.K.block(t * m, k * q, m, q) = rng.uniform_matrix(m, q, -0.3, 0.3);
  pol.p = rng.uniform_vector((T + 1) * m, -0.5, 0.5);
  return pol;
}

// Random mismatch scaled to sit at `frac` of each budget component.
MismatchRealization random_budget_mismatch(const UncertaintyBudget& budget,
                                           int T, int q, int m, double frac,
                                           RngStream& rng) {
  const int nq = (T + 1) * q, nm = (T + 1) * m;
  MismatchRealization mm;
  mm.Delta = Eigen::MatrixXd::Zero(nq, nm);
  mm.Theta_tilde = Eigen::MatrixXd::Zero(nq, nq);
  mm.y0_tilde = Eigen::VectorXd::Zero(nq);
  for (int t = 1; t <= T; ++t)
    for (int j = 0; j < t; ++j) {
      mm.Delta.block(t * q, j * m, q, m) = rng.uniform_matrix(q, m, -1.0, 1.0);
      mm.Theta_tilde.block(t * q, j * q, q, q) = rng.uniform_matrix(q, q, -1.0, 1.0);
    }
  const double dn = induced_norm1(mm.Delta);
  const double tn = induced_norm1(mm.Theta_tilde);
  mm.Delta *= (dn > 0 ? frac * budget.gamma1 / dn : 0.0);
  mm.Theta_tilde *= (tn > 0 ? frac * budget.gamma2 / tn : 0.0);
  Eigen::VectorXd dir = rng.uniform_vector(nq, -1.0, 1.0);
  const double yn = norm1(dir);
  mm.y0_tilde = dir * (yn > 0 ? frac * budget.gamma3 / yn : 0.0);
  return mm;
}

double max_abs_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

std::string trajectories_csv(const MonteCarloResult& result) {
  std::string text = "draw_id,method,t,signal,value\n";
  const auto emit = [&text](int draw, const std::string& method,
                            const TrajectoryRecord& traj) {
    const int n = static_cast<int>(traj.x.rows());
    for (int k = 0; k < traj.tau + traj.T + 1; ++k) {
      const std::string prefix =
          std::to_string(draw) + "," + method + "," + std::to_string(k - traj.tau) + ",";
      for (int d = 0; d < n; ++d)
        text += prefix + "x" + std::to_string(d) + "," + fmt17(traj.x(d, k)) + "\n";
      for (int d = 0; d < traj.q; ++d)
        text += prefix + "y" + std::to_string(d) + "," + fmt17(traj.y[k * traj.q + d]) + "\n";
      for (int d = 0; d < traj.m; ++d)
        text += prefix + "u" + std::to_string(d) + "," + fmt17(traj.u[k * traj.m + d]) + "\n";
      for (int d = 0; d < traj.q; ++d)
        text += prefix + "e" + std::to_string(d) + "," + fmt17(traj.e[k * traj.q + d]) + "\n";
    }
  };
  for (std::size_t d = 0; d < result.draws.size(); ++d) {
    const DrawResult& dr = result.draws[d];
    if (dr.nominal_traj.x.size() > 0)
      emit(static_cast<int>(d), "nominal", dr.nominal_traj);
    if (dr.drsls_traj.x.size() > 0)
      emit(static_cast<int>(d), "drsls", dr.drsls_traj);
  }
  return text;
}

}  // namespace

CostSpec ExperimentConfig::cost() const {
  return CostSpec::uniform_weights(T, sys.model.q(), sys.model.m(), y_weight,
                                   u_weight);
}

ConstraintSpec ExperimentConfig::constraints() const {
  return ConstraintSpec::output_floor_input_box(T, sys.model.q(), sys.model.m(),
                                                y_min, u_max);
}

MonteCarloSpec ExperimentConfig::monte_carlo_spec() const {
  MonteCarloSpec s;
  s.sys = sys;
  s.T = T;
  s.tau = tau;
  s.N = N;
  s.M = M;
  s.budget = budget;
  s.rho_grid = rho_grid;
  s.sigma_grid = sigma_grid;
  s.cost = cost();
  s.constraints = constraints();
  s.nominal_mode = nominal_mode;
  s.perturb_scale = perturb_scale;
  s.model_max_tries = model_max_tries;
  s.window_floor = window_floor;
  s.window_floor_steps = window_floor_steps;
  s.window_max_tries = window_max_tries;
  s.seed = seed;
  s.threads = threads;
  return s;
}

ExperimentConfig experiment_config_from_json(const json& j,
                                             const std::string& base_dir) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  ExperimentConfig cfg;
  cfg.echo = j;

  if (j.contains("system")) {
    cfg.sys = system_from_json(j.at("system"));
  } else if (j.contains("system_file")) {
    std::filesystem::path p = json_string_or(j, "system_file", "");
    if (p.empty()) throw ConfigError("field \"system_file\" must be a non-empty string");
    if (p.is_relative() && !base_dir.empty()) p = std::filesystem::path(base_dir) / p;
    cfg.sys = system_from_json(load_json_file(p.string()));
  } else {
    throw ConfigError("missing field \"system\" (inline) or \"system_file\" (path)");
  }

  cfg.T = json_int_or(j, "T", cfg.T);
  cfg.tau = json_int_or(j, "tau", cfg.tau);
  cfg.N = json_int_or(j, "N", cfg.N);
  cfg.M = json_int_or(j, "M", cfg.M);
  if (cfg.T < 1) throw ConfigError("field \"T\" must be at least 1");
  if (cfg.tau < 1) throw ConfigError("field \"tau\" must be at least 1");
  if (cfg.N < 1) throw ConfigError("field \"N\" must be at least 1");
  if (cfg.M < 1) throw ConfigError("field \"M\" must be at least 1");

  if (j.contains("budget")) {
    const json& b = json_field(j, "budget");
    if (!b.is_object()) throw ConfigError("field \"budget\" must be an object");
    cfg.budget.gamma1 = json_number_or(b, "budget.gamma1", 0.0);
    cfg.budget.gamma2 = json_number_or(b, "budget.gamma2", 0.0);
    cfg.budget.gamma3 = json_number_or(b, "budget.gamma3", 0.0);
    cfg.budget.kappa = json_number_or(b, "budget.kappa", 0.0);
    const auto check = [](double v, const char* name) {
      if (!(v >= 0) || !std::isfinite(v))
        throw ConfigError(std::string("field \"budget.") + name +
                          "\" must be a finite number >= 0");
    };
    check(cfg.budget.gamma1, "gamma1");
    check(cfg.budget.gamma2, "gamma2");
    check(cfg.budget.gamma3, "gamma3");
    check(cfg.budget.kappa, "kappa");
  }

  if (j.contains("rho_grid")) cfg.rho_grid = json_number_list(j, "rho_grid");
  if (cfg.rho_grid.empty()) throw ConfigError("field \"rho_grid\" must be non-empty");
  for (std::size_t i = 0; i < cfg.rho_grid.size(); ++i)
    if (!(cfg.rho_grid[i] >= 0.0 && cfg.rho_grid[i] < 1.0))
      throw ConfigError("field \"rho_grid\" entry " + std::to_string(i) +
                        " must lie in [0, 1), got " + fmt17(cfg.rho_grid[i]));
  if (j.contains("sigma_grid")) cfg.sigma_grid = json_number_list(j, "sigma_grid");
  if (cfg.sigma_grid.empty()) throw ConfigError("field \"sigma_grid\" must be non-empty");
  for (std::size_t i = 0; i < cfg.sigma_grid.size(); ++i)
    if (!(cfg.sigma_grid[i] > 0.0))
      throw ConfigError("field \"sigma_grid\" entry " + std::to_string(i) +
                        " must be positive, got " + fmt17(cfg.sigma_grid[i]));

  if (j.contains("cost")) {
    const json& c = json_field(j, "cost");
    if (!c.is_object()) throw ConfigError("field \"cost\" must be an object");
    cfg.y_weight = json_number_or(c, "cost.y_weight", cfg.y_weight);
    cfg.u_weight = json_number_or(c, "cost.u_weight", cfg.u_weight);
    if (!(cfg.y_weight >= 0)) throw ConfigError("field \"cost.y_weight\" must be >= 0");
    if (!(cfg.u_weight >= 0)) throw ConfigError("field \"cost.u_weight\" must be >= 0");
  }
  if (j.contains("constraints")) {
    const json& c = json_field(j, "constraints");
    if (!c.is_object()) throw ConfigError("field \"constraints\" must be an object");
    cfg.y_min = json_number_or(c, "constraints.y_min", cfg.y_min);
    cfg.u_max = json_number_or(c, "constraints.u_max", cfg.u_max);
    if (!std::isfinite(cfg.y_min))
      throw ConfigError("field \"constraints.y_min\" must be finite");
    if (!(cfg.u_max > 0))
      throw ConfigError("field \"constraints.u_max\" must be positive");
  }

  cfg.nominal_mode = mode_from_string(
      json_string_or(j, "nominal_mode", "mean_certainty_equivalent"), "nominal_mode");
  cfg.perturb_scale = json_number_or(j, "perturb_scale", cfg.perturb_scale);
  if (!(cfg.perturb_scale >= 0))
    throw ConfigError("field \"perturb_scale\" must be >= 0");
  cfg.model_max_tries = json_int_or(j, "model_max_tries", cfg.model_max_tries);
  if (cfg.model_max_tries < 1)
    throw ConfigError("field \"model_max_tries\" must be at least 1");
  cfg.window_floor = json_number_or(j, "window_floor", cfg.window_floor);
  cfg.window_floor_steps = json_int_or(j, "window_floor_steps", cfg.window_floor_steps);
  if (cfg.window_floor_steps < 0)
    throw ConfigError("field \"window_floor_steps\" must be >= 0");
  cfg.window_max_tries = json_int_or(j, "window_max_tries", cfg.window_max_tries);
  if (cfg.window_max_tries < 1)
    throw ConfigError("field \"window_max_tries\" must be at least 1");
  cfg.decay_threshold = json_number_or(j, "decay_threshold", cfg.decay_threshold);
  if (!(cfg.decay_threshold > 0))
    throw ConfigError("field \"decay_threshold\" must be positive");
  cfg.seed = json_u64_or(j, "seed", cfg.seed);
  cfg.threads = json_int_or(j, "threads", cfg.threads);
  if (cfg.threads < 0) throw ConfigError("field \"threads\" must be >= 0");
  cfg.write_trajectories = json_bool_or(j, "write_trajectories", false);
  cfg.out_dir = json_string_or(j, "out_dir", cfg.out_dir);
  if (cfg.out_dir.empty()) throw ConfigError("field \"out_dir\" must be non-empty");
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  const json doc = load_json_file(path);
  const std::string base = std::filesystem::path(path).parent_path().string();
  return experiment_config_from_json(doc, base);
}

std::string metrics_csv(const std::vector<MetricsRow>& rows) {
  std::string text =
      "draw_id,method,open_loop_cost,closed_loop_cost,violation_ratio_steps,"
      "violated,status,epsilon_bar,rho,sigma\n";
  for (const MetricsRow& r : rows) {
    text += std::to_string(r.draw_id) + "," + r.method + "," +
            fmt17(r.open_loop_cost) + "," + fmt17(r.closed_loop_cost) + "," +
            fmt17(r.violation_ratio_steps) + "," + (r.violated ? "1" : "0") +
            "," + r.status + "," + fmt17(r.epsilon_bar) + "," + fmt17(r.rho) +
            "," + fmt17(r.sigma) + "\n";
  }
  return text;
}

nlohmann::json summary_json(const MonteCarloResult& result) {
  const auto rows = result.rows();
  json methods = json::object();
  for (const std::string& name : {std::string("nominal"), std::string("drsls")}) {
    int total = 0, solved = 0, violated = 0, clipped = 0;
    std::vector<double> open, closed, ratio, eps;
    for (const MetricsRow& r : rows) {
      if (r.method != name) continue;
      ++total;
      if (r.status.rfind("optimal", 0) != 0) continue;
      ++solved;
      if (r.violated) ++violated;
      if (r.status.find("clipped") != std::string::npos) ++clipped;
      open.push_back(r.open_loop_cost);
      closed.push_back(r.closed_loop_cost);
      ratio.push_back(r.violation_ratio_steps);
      eps.push_back(r.epsilon_bar);
    }
    json m;
    m["rows"] = total;
    m["solved"] = solved;
    m["violated"] = violated;
    m["clipped"] = clipped;
    m["open_loop_cost_mean"] = mean_of(open);
    m["closed_loop_cost_mean"] = mean_of(closed);
    m["closed_loop_cost_median"] = median_of(closed);
    m["violation_ratio_mean"] = mean_of(ratio);
    m["epsilon_bar_mean"] = mean_of(eps);
    methods[name] = std::move(m);
  }
  std::vector<double> model_tries, window_tries, eg, et, ey;
  for (const DrawResult& d : result.draws) {
    model_tries.push_back(d.model_tries);
    window_tries.push_back(d.window_tries);
    eg.push_back(d.err_G);
    et.push_back(d.err_Theta);
    ey.push_back(d.err_y0);
  }
  json diag;
  diag["model_tries_mean"] = mean_of(model_tries);
  diag["window_tries_mean"] = mean_of(window_tries);
  diag["err_G_max"] = eg.empty() ? 0.0 : *std::max_element(eg.begin(), eg.end());
  diag["err_Theta_max"] = et.empty() ? 0.0 : *std::max_element(et.begin(), et.end());
  diag["err_y0_max"] = ey.empty() ? 0.0 : *std::max_element(ey.begin(), ey.end());
  json out;
  out["draws"] = static_cast<int>(result.draws.size());
  out["samples"] = result.innovations.samples.count();
  out["methods"] = std::move(methods);
  out["diagnostics"] = std::move(diag);
  return out;
}

int cmd_synth(const ExperimentConfig& cfg, SynthMode mode, std::ostream& out) {
  const ProblemSetup p = prepare_problem(cfg);
  SynthesisResult res;
  if (mode == SynthMode::drsls) {
    res = grid_search(p.ops, p.y0, p.draws.samples, cfg.budget, cfg.rho_grid,
                      cfg.sigma_grid, cfg.cost(), cfg.constraints(), cfg.threads);
  } else {
    res = build_nominal_sls(p.ops, p.y0, p.draws.samples, cfg.nominal_mode,
                            cfg.cost(), cfg.constraints());
  }

  ensure_out_dir(cfg.out_dir);
  json doc = synthesis_result_to_json(res);
  doc["mode"] = mode == SynthMode::drsls ? "drsls" : "nominal";
  doc["config"] = cfg.echo;
  save_json_file(out_path(cfg, "result.json"), doc);
  json pol;
  pol["K"] = matrix_to_json(res.policy.K);
  pol["p"] = vector_to_json(res.policy.p);
  pol["T"] = cfg.T;
  save_json_file(out_path(cfg, "policy.json"), pol);

  for (const GridEntry& g : res.table)
    out << "grid rho=" << g.rho << " sigma=" << g.sigma << ": "
        << lp::to_string(g.status) << " objective=" << g.objective << "\n";
  out << "status: " << lp::to_string(res.status) << "\n";
  out << "objective: " << res.objective << "\n";
  out << "epsilon_bar: " << res.epsilon_bar << "\n";
  if (mode == SynthMode::drsls)
    out << "rho: " << res.rho << " sigma: " << res.sigma << "\n";
  return res.status == lp::SolveStatus::optimal ? 0 : 3;
}

int cmd_montecarlo(const ExperimentConfig& cfg, std::ostream& out) {
  const MonteCarloResult result = monte_carlo(cfg.monte_carlo_spec());
  ensure_out_dir(cfg.out_dir);
  write_text_file(out_path(cfg, "metrics.csv"), metrics_csv(result.rows()));
  json s = summary_json(result);
  s["config"] = cfg.echo;
  save_json_file(out_path(cfg, "summary.json"), s);
  if (cfg.write_trajectories)
    write_text_file(out_path(cfg, "trajectories.csv"), trajectories_csv(result));

  for (const std::string& name : {std::string("nominal"), std::string("drsls")}) {
    const json& m = s["methods"][name];
    out << name << ": solved " << m["solved"] << "/" << m["rows"]
        << "  violated " << m["violated"] << "  closed-loop median "
        << m["closed_loop_cost_median"].dump() << "\n";
  }
  return 0;
}

int cmd_sample_innovations(const ExperimentConfig& cfg, std::ostream& out) {
  cfg.sys.validate(cfg.tau);
  RngStream erng = RngStream::derive(cfg.seed, RngPurpose::innovation_samples, 0);
  const InnovationDraws draws =
      generate_innovation_samples(cfg.sys, cfg.T, cfg.tau, cfg.N, erng);
  ensure_out_dir(cfg.out_dir);
  json doc = innovation_draws_to_json(draws, cfg.T, cfg.tau, cfg.sys.model.q(),
                                      cfg.sys.model.m());
  doc["config"] = cfg.echo;
  save_json_file(out_path(cfg, "samples.json"), doc);
  out << "samples: " << draws.samples.count() << "\n";
  out << "max magnitude: " << draws.samples.e.cwiseAbs().maxCoeff() << "\n";
  return 0;
}

int cmd_validate(const ExperimentConfig& cfg, std::ostream& out) {
  const ProblemSetup p = prepare_problem(cfg);
  const int T = cfg.T, q = cfg.sys.model.q(), m = cfg.sys.model.m();
  bool all_ok = true;

  const double decay = predictor_decay_check(cfg.sys.model, cfg.tau);
  out << "tau decay after " << cfg.tau << " steps: " << decay << "\n";
  if (decay > cfg.decay_threshold)
    out << "warning: predictor tail " << decay << " is above the threshold "
        << cfg.decay_threshold << "; consider a larger tau\n";

  RngStream rng = RngStream::derive(cfg.seed, RngPurpose::test_fixture, 0);

  // Policy extraction and the subspace identity, on random policies.
  {
    double policy_err = 0.0, subspace_err = 0.0;
    for (int i = 0; i < 20; ++i) {
      const AffinePolicy pol = random_policy(T, q, m, rng);
      const SlsParam par = params_from_policy(pol, p.ops.G);
      subspace_err = std::max(subspace_err, validate_subspace(p.ops.G, par));
      const AffinePolicy back = extract_policy(par);
      policy_err = std::max(policy_err, max_abs_diff(back.K, pol.K));
      policy_err = std::max(policy_err, max_abs_diff(back.p, pol.p));
    }
    const bool ok = policy_err <= 1e-8 && subspace_err <= 1e-10;
    all_ok = all_ok && ok;
    out << "round trip: " << (ok ? "pass" : "FAIL")
        << "  max policy error " << policy_err << "  max subspace residual "
        << subspace_err << "\n";
  }

  // Response maps under in-budget mismatches keep the subspace identity of
  // the perturbed plant and leave the policy untouched.
  {
    const AffinePolicy pol = random_policy(T, q, m, rng);
    const SlsParam par = params_from_policy(pol, p.ops.G);
    double policy_err = 0.0, subspace_err = 0.0;
    for (int i = 0; i < 20; ++i) {
      const double frac = (i + 1) / 20.0;
      const MismatchRealization mm =
          random_budget_mismatch(cfg.budget, T, q, m, frac, rng);
      const Eigen::VectorXd e = p.draws.samples.e.col(i % p.draws.samples.count());
      const TrueResponse tr =
          true_response_under_mismatch(par, mm, p.y0, p.ops.Theta, e);
      subspace_err = std::max(subspace_err,
                              validate_subspace(p.ops.G + mm.Delta, tr.param));
      const AffinePolicy back = extract_policy(tr.param);
      policy_err = std::max(policy_err, max_abs_diff(back.K, pol.K));
      policy_err = std::max(policy_err, max_abs_diff(back.p, pol.p));
    }
    const bool ok = policy_err <= 1e-8 && subspace_err <= 1e-8;
    all_ok = all_ok && ok;
    out << "mismatch response: " << (ok ? "pass" : "FAIL")
        << "  max policy drift " << policy_err << "  max subspace residual "
        << subspace_err << "\n";
  }

  // Term bounds around the synthesized solution.
  {
    const SynthesisResult res =
        grid_search(p.ops, p.y0, p.draws.samples, cfg.budget, cfg.rho_grid,
                    cfg.sigma_grid, cfg.cost(), cfg.constraints(), cfg.threads);
    if (res.status != lp::SolveStatus::optimal) {
      all_ok = false;
      out << "term bounds: FAIL  synthesis status "
          << lp::to_string(res.status) << ", no feasible grid point\n";
    } else {
      const GainCaps caps{res.rho, res.sigma};
      const double bound =
          eval_radius_bound(res.param, p.ops, p.y0, p.draws.samples, cfg.budget, caps);
      const int N = p.draws.samples.count();
      int term_violations = 0;
      double worst_shift = 0.0;
      for (int d = 0; d < 50; ++d) {
        const double frac = (d + 1) / 50.0;
        const MismatchRealization mm =
            random_budget_mismatch(cfg.budget, T, q, m, frac, rng);
        double avg_shift = 0.0;
        for (int i = 0; i < N; ++i) {
          const Eigen::VectorXd e = p.draws.samples.e.col(i);
          const ShiftTermBounds b =
              shift_term_bounds(res.param, p.ops, p.y0, mm, e, cfg.budget, caps);
          if (b.resolvent_lhs > b.resolvent_rhs + 1e-10 ||
              b.mismatch_lhs > b.mismatch_rhs + 1e-10 ||
              b.bias_lhs > b.bias_rhs + 1e-10 ||
              b.estimation_lhs > b.estimation_rhs + 1e-10)
            ++term_violations;
          const TrueResponse tr =
              true_response_under_mismatch(res.param, mm, p.y0, p.ops.Theta, e);
          avg_shift += norm1(tr.response.eta() - res.eta_hat.col(i));
        }
        avg_shift /= N;
        worst_shift = std::max(worst_shift, avg_shift);
        if (avg_shift > bound + 1e-9) ++term_violations;
      }
      const bool ok = term_violations == 0;
      all_ok = all_ok && ok;
      out << "term bounds: " << (ok ? "pass" : "FAIL") << "  violations "
          << term_violations << "  radius bound " << bound
          << "  worst averaged shift " << worst_shift << "\n";
    }
  }

  out << (all_ok ? "validate: all suites passed"
                 : "validate: at least one suite FAILED")
      << "\n";
  return all_ok ? 0 : 4;
}

}  // namespace drsls
