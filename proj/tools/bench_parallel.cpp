#include <chrono>
#include <cstdlib>
#include <iostream>
#include <string>

#include "drsls/experiment.hpp"
#include "drsls/parallel.hpp"
#include "drsls/sim_harness.hpp"

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

drsls::TrueSystem bench_system() {
  drsls::TrueSystem sys;
  sys.model.A = (Eigen::MatrixXd(2, 2) << 0.7326, -0.0861, 0.1722, 0.9909).finished();
  sys.model.B = (Eigen::MatrixXd(2, 1) << 0.0609, 0.0).finished();
  sys.model.C = (Eigen::MatrixXd(1, 2) << 0.0, 1.4142).finished();
  sys.model.D = Eigen::MatrixXd::Zero(1, 1);
  sys.model.L = (Eigen::MatrixXd(2, 1) << 0.1, 0.1).finished();
  sys.w = drsls::DisturbanceSpec::symmetric(2, 0.01);
  sys.v = drsls::DisturbanceSpec::symmetric(1, 0.01);
  return sys;
}

drsls::MonteCarloSpec bench_spec(int M) {
  drsls::MonteCarloSpec spec;
  spec.sys = bench_system();
  spec.T = 10;
  spec.tau = 15;
  spec.N = 30;
  spec.M = M;
  spec.budget = {0.05, 0.05, 0.05, 0.005};
  spec.rho_grid = {0.1, 0.2};
  spec.sigma_grid = {2.0, 5.0};
  spec.cost = drsls::CostSpec::uniform_weights(spec.T, 1, 1, 1.0, 0.1);
  spec.constraints =
      drsls::ConstraintSpec::output_floor_input_box(spec.T, 1, 1, -0.5, 1.0);
  spec.perturb_scale = 0.002;
  spec.seed = 7;
  return spec;
}

}  // namespace

int main(int argc, char** argv) {
  int M = 8;
  if (argc > 1) M = std::max(1, std::atoi(argv[1]));
  const int hw = drsls::hardware_threads();
  std::cout << "hardware threads: " << hw << "\n";
  std::cout << "model draws: " << M << "\n\n";

  drsls::MonteCarloSpec spec = bench_spec(M);

  spec.threads = 1;
  auto t0 = Clock::now();
  const drsls::MonteCarloResult serial = drsls::monte_carlo(spec);
  const double t_serial = seconds_since(t0);
  std::cout << "serial draws:    " << t_serial << " s\n";

  spec.threads = 0;  // hardware default
  t0 = Clock::now();
  const drsls::MonteCarloResult parallel = drsls::monte_carlo(spec);
  const double t_parallel = seconds_since(t0);
  std::cout << "parallel draws:  " << t_parallel << " s  (speedup "
            << t_serial / t_parallel << "x)\n";

  const std::string a = drsls::metrics_csv(serial.rows());
  const std::string b = drsls::metrics_csv(parallel.rows());
  if (a != b) {
    std::cout << "result check:    MISMATCH between serial and parallel rows\n";
    return 1;
  }
  std::cout << "result check:    serial and parallel rows are byte-identical\n\n";

  // The inner parallel unit: one synthesis sweep over the (rho, sigma) grid.
  const drsls::StackedOperators ops = drsls::stacked_operators(spec.sys.model, spec.T);
  drsls::RngStream erng = drsls::RngStream::derive(spec.seed, drsls::RngPurpose::innovation_samples, 0);
  const drsls::InnovationDraws draws =
      drsls::generate_innovation_samples(spec.sys, spec.T, spec.tau, spec.N, erng);
  drsls::RngStream wrng = drsls::RngStream::derive(spec.seed, drsls::RngPurpose::warmup, 0);
  const drsls::WarmupState start = drsls::warmup_window(spec.sys, spec.tau, wrng);
  const Eigen::VectorXd y0 =
      drsls::window_free_response(spec.sys.model, spec.T, spec.tau, start.window);
  const std::vector<double> rho{0.05, 0.1, 0.2, 0.3};
  const std::vector<double> sigma{1.0, 2.0, 5.0, 10.0};

  t0 = Clock::now();
  const drsls::SynthesisResult g1 =
      drsls::grid_search(ops, y0, draws.samples, spec.budget, rho, sigma,
                         spec.cost, spec.constraints, 1);
  const double g_serial = seconds_since(t0);
  std::cout << "serial grid:     " << g_serial << " s  (" << rho.size() * sigma.size()
            << " points)\n";

  t0 = Clock::now();
  const drsls::SynthesisResult g2 =
      drsls::grid_search(ops, y0, draws.samples, spec.budget, rho, sigma,
                         spec.cost, spec.constraints, 0);
  const double g_parallel = seconds_since(t0);
  std::cout << "parallel grid:   " << g_parallel << " s  (speedup "
            << g_serial / g_parallel << "x)\n";

  if (g1.status != g2.status || g1.objective != g2.objective ||
      g1.rho != g2.rho || g1.sigma != g2.sigma) {
    std::cout << "result check:    MISMATCH between serial and parallel sweeps\n";
    return 1;
  }
  std::cout << "result check:    serial and parallel sweeps agree exactly\n";
  return 0;
}
