#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <string>

#include "drsls/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Distributionally robust controller synthesis and closed-loop benchmarking"};
  app.require_subcommand(1);

  std::string config_path, out_dir, mode = "drsls";
  std::uint64_t seed = 0;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "experiment configuration file")
        ->required();
    sub->add_option("--seed", seed, "override the configured seed");
    sub->add_option("--out", out_dir, "override the output directory");
  };

  CLI::App* synth = app.add_subcommand("synth", "solve one synthesis problem");
  add_common(synth);
  synth->add_option("--mode", mode, "nominal or drsls (default drsls)")
      ->check(CLI::IsMember({"nominal", "drsls"}));
  CLI::App* montecarlo = app.add_subcommand(
      "montecarlo", "run the nominal-versus-robust closed-loop comparison");
  add_common(montecarlo);
  CLI::App* validate = app.add_subcommand(
      "validate", "run the self-check suites on the configured problem");
  add_common(validate);
  add_common(app.add_subcommand("sample-innovations",
                                "generate and store the innovation samples"));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  CLI::App* sub = app.get_subcommands().front();
  try {
    drsls::ExperimentConfig cfg = drsls::load_experiment_config(config_path);
    if (sub->count("--seed") > 0) {
      cfg.seed = seed;
      cfg.echo["seed"] = seed;
    }
    if (sub->count("--out") > 0) {
      cfg.out_dir = out_dir;
      cfg.echo["out_dir"] = out_dir;
    }
    if (sub == synth) {
      const auto m = mode == "nominal" ? drsls::SynthMode::nominal
                                       : drsls::SynthMode::drsls;
      return drsls::cmd_synth(cfg, m, std::cout);
    }
    if (sub == montecarlo) return drsls::cmd_montecarlo(cfg, std::cout);
    if (sub == validate) return drsls::cmd_validate(cfg, std::cout);
    return drsls::cmd_sample_innovations(cfg, std::cout);
  } catch (const drsls::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
