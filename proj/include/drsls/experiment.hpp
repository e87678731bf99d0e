#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "drsls/matrix_io.hpp"
#include "drsls/sim_harness.hpp"

namespace drsls {

// One batch run, parsed from a single JSON document. The plant can live in
// its own file ("system_file", resolved relative to the config) or inline
// under "system"; everything else is scalars and grids. The raw document is
// kept and echoed into every output file so results carry their provenance.
struct ExperimentConfig {
  TrueSystem sys;
  int T = 15, tau = 25;
  int N = 100, M = 50;
  UncertaintyBudget budget;
  std::vector<double> rho_grid{0.05, 0.1, 0.2};
  std::vector<double> sigma_grid{1.0, 2.0, 5.0};
  double y_weight = 1.0, u_weight = 0.1;
  double y_min = -0.01, u_max = 1.0;
  NominalMode nominal_mode = NominalMode::mean_certainty_equivalent;
  double perturb_scale = 0.02;
  int model_max_tries = 200000;
  double window_floor = -1e300;
  int window_floor_steps = 0;
  int window_max_tries = 10000;
  double decay_threshold = 1e-6;  // warn when the tau-step predictor misses it
  std::uint64_t seed = 1;
  int threads = 0;
  bool write_trajectories = false;
  std::string out_dir = "out";
  nlohmann::json echo;

  CostSpec cost() const;
  ConstraintSpec constraints() const;
  MonteCarloSpec monte_carlo_spec() const;
};

// Parses and validates; throws ConfigError naming the offending field.
// `base_dir` anchors a relative "system_file".
ExperimentConfig experiment_config_from_json(const nlohmann::json& j,
                                             const std::string& base_dir);
ExperimentConfig load_experiment_config(const std::string& path);

enum class SynthMode { nominal, drsls };

// The comparison table as CSV text, one row per MetricsRow, fixed header:
// draw_id, method, open_loop_cost, closed_loop_cost, violation_ratio_steps,
// violated, status, epsilon_bar, rho, sigma. Formatting is deterministic,
// so equal rows give byte-equal text.
std::string metrics_csv(const std::vector<MetricsRow>& rows);

// Per-method aggregates of a finished run: row counts, solve counts,
// violation counts, and cost means/medians over the solved rows.
nlohmann::json summary_json(const MonteCarloResult& result);

// Command bodies behind the CLI, reusable from tests. Each writes its files
// under cfg.out_dir, prints a short report to `out`, and returns a process
// exit code: 0 success, 2 validation failure, 3 solver/sampling failure,
// 4 property-suite failure.
int cmd_synth(const ExperimentConfig& cfg, SynthMode mode, std::ostream& out);
int cmd_montecarlo(const ExperimentConfig& cfg, std::ostream& out);
int cmd_validate(const ExperimentConfig& cfg, std::ostream& out);
int cmd_sample_innovations(const ExperimentConfig& cfg, std::ostream& out);

}  // namespace drsls
