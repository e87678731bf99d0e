#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "drsls/dro_synthesis.hpp"
#include "drsls/lti_model.hpp"
#include "drsls/rng.hpp"
#include "drsls/sls_core.hpp"

namespace drsls {

// Per-element uniform interval, lower <= upper.
struct DisturbanceSpec {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  static DisturbanceSpec symmetric(int n, double amp) {
    DisturbanceSpec d;
    d.lower = Eigen::VectorXd::Constant(n, -amp);
    d.upper = Eigen::VectorXd::Constant(n, amp);
    return d;
  }
};

// The plant simulations run against:
//   x_{t+1} = A x_t + B u_t + w_t,   y_t = C x_t + D u_t + v_t
// with w, v drawn from the interval specs. The observer gain L is part of
// the system description: innovations are defined as the residuals of this
// fixed observer, not of any estimator fitted to the noise.
struct TrueSystem {
  InnovationModel model;
  DisturbanceSpec w;  // dim n
  DisturbanceSpec v;  // dim q

  // Throws std::invalid_argument on dimension mismatch, a flipped interval,
  // or a predictor that has not contracted below `max_decay` after tau steps.
  void validate(int tau, double max_decay = 1.0) const;
};

// State of one simulation at t = 0, produced by a warm-up run: the I/O
// window, the true plant state, the observer state (the exact free-response
// anchor of the lifted model), and the warm-up trajectory for the record.
struct WarmupState {
  PastWindow window;
  Eigen::VectorXd x;      // true state at t = 0
  Eigen::VectorXd xhat;   // observer state at t = 0
  Eigen::MatrixXd x_past; // n x tau, t = -tau..-1
  Eigen::VectorXd e_past; // tau*q innovations during warm-up
  int tries = 1;
};

// One closed-loop (or open warm-up) trajectory over t = -tau..T. Column k of
// x and segment k of y/u/e correspond to t = k - tau. Violation flags cover
// the controlled steps 0..T and are filled by evaluate_metrics.
struct TrajectoryRecord {
  int T = 0, tau = 0, q = 0, m = 0;
  Eigen::MatrixXd x;
  Eigen::VectorXd y, u, e;
  std::vector<bool> violated_step;

  // Stacked controlled-segment response col(y_0..y_T, u_0..u_T).
  Eigen::VectorXd eta() const;
};

// One line of the Monte-Carlo comparison table.
struct MetricsRow {
  int draw_id = 0;
  std::string method;
  double open_loop_cost = std::nan("");
  double closed_loop_cost = std::nan("");
  double violation_ratio_steps = 0.0;
  bool violated = false;
  std::string status;  // solver status, "_clipped" appended when cost was capped
  double epsilon_bar = 0.0;
  double rho = 0.0, sigma = 0.0;
};

// Innovation samples plus the window each one trailed behind.
struct InnovationDraws {
  SampleSet samples;
  std::vector<PastWindow> windows;
};

// A perturbed synthesis model accepted by rejection sampling, with its
// lifted operators and the realized mismatch norms against the true system.
struct NominalDraw {
  InnovationModel model;
  StackedOperators ops;
  Eigen::VectorXd y0_hat;  // free response replayed through the window
  double err_G = 0.0, err_Theta = 0.0, err_y0 = 0.0;
  int tries = 1;
};

// Free response col(C xhat, C A xhat, ...) of the model's observer state
// after replaying the window from zero; the exact offset of the lifted
// model whenever the observer genuinely started at zero tau steps ago.
Eigen::VectorXd window_free_response(const InnovationModel& model, int T, int tau,
                                     const PastWindow& window);

// Runs the true plant for tau steps from x = 0 with i.i.d. uniform [-1,1]
// inputs and fresh noise. Redraws the whole window until the free response
// of the first `floor_steps` prediction steps clears `floor` (a feasibility
// gate for output-floor constraints at steps the input cannot yet reach);
// throws std::runtime_error with the acceptance count after max_tries.
WarmupState warmup_window(const TrueSystem& sys, int tau, RngStream& rng,
                          double floor = -1e300, int floor_steps = 0,
                          int max_tries = 1000);

// N independent warm-up-plus-prediction runs of the true plant under
// uniform [-1,1] inputs; records the observer residuals over t = 0..T as
// the innovation samples. The residual recursion is input-independent, so
// the samples characterize the noise, not the excitation.
InnovationDraws generate_innovation_samples(const TrueSystem& sys, int T, int tau,
                                            int N, RngStream& rng);

// Perturbs the entries of (A, B, C) with uniform noise of half-width
// `scale` (D and L stay at the true values) until the lifted mismatch fits
// the budget on the given reference window:
//   ||G - Ghat|| <= gamma1, ||Theta - ThetaHat|| <= gamma2,
//   ||y0 - y0hat||_1 <= gamma3.
// A zero budget returns the true model untouched. Throws std::runtime_error
// with acceptance diagnostics when max_tries draws all miss.
NominalDraw sample_nominal_model(const TrueSystem& sys,
                                 const UncertaintyBudget& budget, int T, int tau,
                                 const PastWindow& window, double scale,
                                 RngStream& rng, int max_tries = 100000);

// Steps the true plant from the warm-up state under u_t = sum_{k<t} K_{t,k}
// y_k + p_t evaluated on the realized outputs, with the noise columns
// supplied by the caller (so both methods of a draw can share them). The
// policy is applied once, no re-solving; divergence is recorded as-is.
TrajectoryRecord simulate_closed_loop(const TrueSystem& sys,
                                      const AffinePolicy& policy,
                                      const WarmupState& start,
                                      const Eigen::MatrixXd& w,  // n x (T+1)
                                      const Eigen::MatrixXd& v,  // q x (T+1)
                                      int T);

// Fills traj.violated_step against the constraint stages and produces the
// comparison row: open_loop_cost = h(predicted), closed_loop_cost =
// h(realized) capped at `clip` (status gets "_clipped"), per-step violation
// ratio and the any-step flag. Non-finite trajectories count as violated.
MetricsRow evaluate_metrics(TrajectoryRecord& traj,
                            const Eigen::VectorXd& predicted_eta,
                            const CostSpec& cost,
                            const ConstraintSpec& constraints,
                            double clip = 1e9);

// Full comparison experiment configuration.
struct MonteCarloSpec {
  TrueSystem sys;
  int T = 15, tau = 25;
  int N = 100;  // innovation samples
  int M = 50;   // model draws
  UncertaintyBudget budget;
  std::vector<double> rho_grid{0.05, 0.1, 0.2, 0.3, 0.4, 0.5};
  std::vector<double> sigma_grid{1.0, 2.0, 5.0, 10.0, 20.0};
  CostSpec cost;
  ConstraintSpec constraints;
  NominalMode nominal_mode = NominalMode::mean_certainty_equivalent;
  double perturb_scale = 0.02;
  int model_max_tries = 200000;
  double window_floor = -1e300;
  int window_floor_steps = 0;
  int window_max_tries = 10000;
  std::uint64_t seed = 1;
  int threads = 0;  // <= 1 serial; draws are the parallel unit
  lp::SolveOptions solver;
};

// Everything produced for one model draw: the two table rows, the two
// trajectories behind them, and the accepted model's mismatch diagnostics.
struct DrawResult {
  MetricsRow nominal_row, drsls_row;
  TrajectoryRecord nominal_traj, drsls_traj;
  double err_G = 0.0, err_Theta = 0.0, err_y0 = 0.0;
  int model_tries = 0, window_tries = 0;
};

struct MonteCarloResult {
  InnovationDraws innovations;
  std::vector<DrawResult> draws;  // in draw order

  std::vector<MetricsRow> rows() const;  // nominal then drsls, per draw
};

// Runs the comparison: innovation samples once, then per draw a fresh
// warm-up window, an accepted perturbed model, one synthesis per method and
// one simulation per policy against the true plant under shared noise.
// Synthesis failures land in the row status; the run continues.
MonteCarloResult monte_carlo(const MonteCarloSpec& spec);

}  // namespace drsls
