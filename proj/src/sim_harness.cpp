#include "drsls/sim_harness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "drsls/norms.hpp"
#include "drsls/parallel.hpp"

namespace drsls {

namespace {

struct StepOut {
  Eigen::VectorXd y, e;
};

// One step of the true plant with the fixed observer running alongside.
// The observer update is A xhat + B u + L e, i.e. the innovation-form
// recursion, so the recorded residuals e are exactly the innovations of the
// lifted model anchored at the observer's start state.
StepOut plant_step(const InnovationModel& md, Eigen::VectorXd& x,
                   Eigen::VectorXd& xhat, const Eigen::VectorXd& u,
                   const Eigen::VectorXd& w, const Eigen::VectorXd& v) {
  StepOut o;
  o.y = md.C * x + md.D * u + v;
  o.e = o.y - md.C * xhat - md.D * u;
  x = md.A * x + md.B * u + w;
  xhat = md.A * xhat + md.B * u + md.L * o.e;
  return o;
}

void check_interval(const DisturbanceSpec& d, int dim, const char* what) {
  if (d.lower.size() != dim || d.upper.size() != dim)
    throw std::invalid_argument(std::string(what) + " interval dimension mismatch");
  for (int i = 0; i < dim; ++i) {
    if (!std::isfinite(d.lower[i]) || !std::isfinite(d.upper[i]))
      throw std::invalid_argument(std::string(what) + " interval must be finite");
    if (d.lower[i] > d.upper[i])
      throw std::invalid_argument(std::string(what) + " interval is flipped");
  }
}

}  // namespace

void TrueSystem::validate(int tau, double max_decay) const {
  model.validate();
  check_interval(w, model.n(), "w");
  check_interval(v, model.q(), "v");
  const double decay = predictor_decay_check(model, tau);
  if (!(decay < max_decay)) {
    std::ostringstream msg;
    msg << "predictor residual ||(A-LC)^" << tau << "|| = " << decay
        << " has not contracted below " << max_decay;
    throw std::invalid_argument(msg.str());
  }
}

Eigen::VectorXd TrajectoryRecord::eta() const {
  Eigen::VectorXd out((T + 1) * (q + m));
  out.head((T + 1) * q) = y.tail((T + 1) * q);
  out.tail((T + 1) * m) = u.tail((T + 1) * m);
  return out;
}

Eigen::VectorXd window_free_response(const InnovationModel& model, int T, int tau,
                                     const PastWindow& window) {
  const MarkovBank bank = predictor_markov_params(model, tau);
  Eigen::VectorXd xk = window_state_estimate(bank, window);
  const int q = model.q();
  Eigen::VectorXd y0((T + 1) * q);
  for (int t = 0; t <= T; ++t) {
    y0.segment(t * q, q) = model.C * xk;
    xk = model.A * xk;
  }
  return y0;
}

WarmupState warmup_window(const TrueSystem& sys, int tau, RngStream& rng,
                          double floor, int floor_steps, int max_tries) {
  const InnovationModel& md = sys.model;
  const int n = md.n(), m = md.m(), q = md.q();
  for (int attempt = 1; attempt <= max_tries; ++attempt) {
    WarmupState ws;
    ws.x = Eigen::VectorXd::Zero(n);
    ws.xhat = Eigen::VectorXd::Zero(n);
    ws.x_past.resize(n, tau);
    ws.e_past.resize(tau * q);
    ws.window.u_past.resize(tau * m);
    ws.window.y_past.resize(tau * q);
    for (int k = 0; k < tau; ++k) {
      const Eigen::VectorXd u = rng.uniform_vector(m, -1.0, 1.0);
      const Eigen::VectorXd w = rng.uniform_vector(sys.w.lower, sys.w.upper);
      const Eigen::VectorXd v = rng.uniform_vector(sys.v.lower, sys.v.upper);
      ws.x_past.col(k) = ws.x;
      const StepOut o = plant_step(md, ws.x, ws.xhat, u, w, v);
      ws.window.u_past.segment(k * m, m) = u;
      ws.window.y_past.segment(k * q, q) = o.y;
      ws.e_past.segment(k * q, q) = o.e;
    }
    ws.tries = attempt;
    bool ok = true;
    Eigen::VectorXd xk = ws.xhat;
    for (int t = 0; t < floor_steps && ok; ++t) {
      if ((md.C * xk).minCoeff() < floor) ok = false;
      xk = md.A * xk;
    }
    if (ok) return ws;
  }
  std::ostringstream msg;
  msg << "warm-up rejection exhausted " << max_tries
      << " windows without clearing the free-response floor " << floor << " over "
      << floor_steps << " steps";
  throw std::runtime_error(msg.str());
}

InnovationDraws generate_innovation_samples(const TrueSystem& sys, int T, int tau,
                                            int N, RngStream& rng) {
  if (N < 1) throw std::invalid_argument("sample count must be >= 1");
  const InnovationModel& md = sys.model;
  const int m = md.m(), q = md.q();
  InnovationDraws out;
  out.samples.e.resize((T + 1) * q, N);
  out.windows.reserve(static_cast<std::size_t>(N));
  for (int i = 0; i < N; ++i) {
    WarmupState ws = warmup_window(sys, tau, rng);
    Eigen::VectorXd x = ws.x, xhat = ws.xhat;
    for (int t = 0; t <= T; ++t) {
      const Eigen::VectorXd u = rng.uniform_vector(m, -1.0, 1.0);
      const Eigen::VectorXd w = rng.uniform_vector(sys.w.lower, sys.w.upper);
      const Eigen::VectorXd v = rng.uniform_vector(sys.v.lower, sys.v.upper);
      const StepOut o = plant_step(md, x, xhat, u, w, v);
      out.samples.e.col(i).segment(t * q, q) = o.e;
    }
    out.windows.push_back(ws.window);
  }
  return out;
}

NominalDraw sample_nominal_model(const TrueSystem& sys,
                                 const UncertaintyBudget& budget, int T, int tau,
                                 const PastWindow& window, double scale,
                                 RngStream& rng, int max_tries) {
  const InnovationModel& md = sys.model;
  const StackedOperators true_ops = stacked_operators(md, T);
  const Eigen::VectorXd true_y0 = window_free_response(md, T, tau, window);

  if (budget.gamma1 <= 0.0 && budget.gamma2 <= 0.0 && budget.gamma3 <= 0.0) {
    NominalDraw d;
    d.model = md;
    d.ops = true_ops;
    d.y0_hat = true_y0;
    d.tries = 0;
    return d;
  }

  int pass_G = 0, pass_Theta = 0;
  for (int attempt = 1; attempt <= max_tries; ++attempt) {
    InnovationModel cand = md;
    cand.A += rng.uniform_matrix(md.n(), md.n(), -scale, scale);
    cand.B += rng.uniform_matrix(md.n(), md.m(), -scale, scale);
    cand.C += rng.uniform_matrix(md.q(), md.n(), -scale, scale);
    const StackedOperators ops = stacked_operators(cand, T);
    const double err_G = induced_norm1(Eigen::MatrixXd(ops.G - true_ops.G));
    if (err_G > budget.gamma1) continue;
    ++pass_G;
    const double err_Theta =
        induced_norm1(Eigen::MatrixXd(ops.Theta - true_ops.Theta));
    if (err_Theta > budget.gamma2) continue;
    ++pass_Theta;
    const Eigen::VectorXd y0_hat = window_free_response(cand, T, tau, window);
    const double err_y0 = norm1(y0_hat - true_y0);
    if (err_y0 > budget.gamma3) continue;
    NominalDraw d;
    d.model = cand;
    d.ops = ops;
    d.y0_hat = y0_hat;
    d.err_G = err_G;
    d.err_Theta = err_Theta;
    d.err_y0 = err_y0;
    d.tries = attempt;
    return d;
  }
  std::ostringstream msg;
  msg << "model rejection exhausted " << max_tries << " draws at scale " << scale
      << ": " << pass_G << " passed the G budget, " << pass_Theta
      << " also passed the Theta budget, none passed all three";
  throw std::runtime_error(msg.str());
}

TrajectoryRecord simulate_closed_loop(const TrueSystem& sys,
                                      const AffinePolicy& policy,
                                      const WarmupState& start,
                                      const Eigen::MatrixXd& w,
                                      const Eigen::MatrixXd& v, int T) {
  const InnovationModel& md = sys.model;
  const int n = md.n(), m = md.m(), q = md.q();
  const int tau = static_cast<int>(start.x_past.cols());
  TrajectoryRecord tr;
  tr.T = T;
  tr.tau = tau;
  tr.q = q;
  tr.m = m;
  tr.x.resize(n, tau + T + 1);
  tr.y.resize((tau + T + 1) * q);
  tr.u.resize((tau + T + 1) * m);
  tr.e.resize((tau + T + 1) * q);
  tr.x.leftCols(tau) = start.x_past;
  tr.y.head(tau * q) = start.window.y_past;
  tr.u.head(tau * m) = start.window.u_past;
  tr.e.head(tau * q) = start.e_past;
  tr.u.tail((T + 1) * m).setZero();

  Eigen::VectorXd x = start.x, xhat = start.xhat;
  Eigen::VectorXd ystack = Eigen::VectorXd::Zero((T + 1) * q);
  for (int t = 0; t <= T; ++t) {
    Eigen::VectorXd u = policy.p.segment(t * m, m);
    for (int k = 0; k < t; ++k)
      u += policy.K.block(t * m, k * q, m, q) * ystack.segment(k * q, q);
    tr.x.col(tau + t) = x;
    const StepOut o = plant_step(md, x, xhat, u, w.col(t), v.col(t));
    ystack.segment(t * q, q) = o.y;
    tr.y.segment((tau + t) * q, q) = o.y;
    tr.u.segment((tau + t) * m, m) = u;
    tr.e.segment((tau + t) * q, q) = o.e;
  }
  return tr;
}

MetricsRow evaluate_metrics(TrajectoryRecord& traj,
                            const Eigen::VectorXd& predicted_eta,
                            const CostSpec& cost,
                            const ConstraintSpec& constraints, double clip) {
  MetricsRow row;
  const Eigen::VectorXd eta = traj.eta();
  row.open_loop_cost = (cost.w.array() * predicted_eta.array()).abs().sum();
  double realized = (cost.w.array() * eta.array()).abs().sum();
  if (!std::isfinite(realized) || realized > clip) {
    realized = clip;
    row.status = "clipped";
  }
  row.closed_loop_cost = realized;

  traj.violated_step.assign(constraints.stages.size(), false);
  int bad = 0;
  for (std::size_t k = 0; k < constraints.stages.size(); ++k) {
    bool viol = false;
    for (const auto& piece : constraints.stages[k].pieces) {
      const double val = piece.a.dot(eta) + piece.b;
      if (!std::isfinite(val) || val > 0.0) viol = true;
    }
    traj.violated_step[k] = viol;
    if (viol) ++bad;
  }
  row.violation_ratio_steps =
      constraints.stages.empty()
          ? 0.0
          : static_cast<double>(bad) / static_cast<double>(constraints.stages.size());
  row.violated = bad > 0;
  return row;
}

std::vector<MetricsRow> MonteCarloResult::rows() const {
  std::vector<MetricsRow> out;
  out.reserve(2 * draws.size());
  for (const auto& d : draws) {
    out.push_back(d.nominal_row);
    out.push_back(d.drsls_row);
  }
  return out;
}

namespace {

// Simulates one synthesized policy (if any) and fills its table row.
void run_method(const MonteCarloSpec& spec, int draw_id, const std::string& method,
                const SynthesisResult& syn, const NominalDraw& nm,
                const WarmupState& ws, const Eigen::MatrixXd& w,
                const Eigen::MatrixXd& v, const Eigen::VectorXd& e_mean,
                MetricsRow& row, TrajectoryRecord& traj) {
  row.draw_id = draw_id;
  row.method = method;
  row.epsilon_bar = syn.epsilon_bar;
  row.rho = syn.rho;
  row.sigma = syn.sigma;
  if (syn.status != lp::SolveStatus::optimal) {
    row.status = lp::to_string(syn.status);
    return;
  }
  const Eigen::VectorXd predicted =
      response_from_param(syn.param, nm.y0_hat, nm.ops.Theta, e_mean).eta();
  traj = simulate_closed_loop(spec.sys, syn.policy, ws, w, v, spec.T);
  MetricsRow metrics =
      evaluate_metrics(traj, predicted, spec.cost, spec.constraints);
  const std::string suffix = metrics.status;
  metrics.draw_id = draw_id;
  metrics.method = method;
  metrics.epsilon_bar = syn.epsilon_bar;
  metrics.rho = syn.rho;
  metrics.sigma = syn.sigma;
  metrics.status = lp::to_string(syn.status);
  if (!suffix.empty()) metrics.status += "_" + suffix;
  row = metrics;
}

}  // namespace

MonteCarloResult monte_carlo(const MonteCarloSpec& spec) {
  if (spec.T < 1 || spec.tau < 1 || spec.N < 1 || spec.M < 1)
    throw std::invalid_argument("T, tau, N, M must all be >= 1");
  spec.sys.validate(spec.tau);

  MonteCarloResult out;
  RngStream erng =
      RngStream::derive(spec.seed, RngPurpose::innovation_samples, 0);
  out.innovations =
      generate_innovation_samples(spec.sys, spec.T, spec.tau, spec.N, erng);
  const Eigen::VectorXd e_mean = out.innovations.samples.mean();
  const int n = spec.sys.model.n(), q = spec.sys.model.q();

  out.draws = parallel_map<DrawResult>(spec.M, spec.threads, [&](int d) {
    DrawResult dr;
    RngStream wrng = RngStream::derive(spec.seed, RngPurpose::warmup,
                                       static_cast<std::uint64_t>(d));
    WarmupState ws =
        warmup_window(spec.sys, spec.tau, wrng, spec.window_floor,
                      spec.window_floor_steps, spec.window_max_tries);
    dr.window_tries = ws.tries;

    RngStream mrng = RngStream::derive(spec.seed, RngPurpose::model_perturbation,
                                       static_cast<std::uint64_t>(d));
    NominalDraw nm =
        sample_nominal_model(spec.sys, spec.budget, spec.T, spec.tau, ws.window,
                             spec.perturb_scale, mrng, spec.model_max_tries);
    dr.model_tries = nm.tries;
    dr.err_G = nm.err_G;
    dr.err_Theta = nm.err_Theta;
    dr.err_y0 = nm.err_y0;

    RngStream nrng = RngStream::derive(spec.seed, RngPurpose::process_noise,
                                       static_cast<std::uint64_t>(d));
    Eigen::MatrixXd w(n, spec.T + 1), v(q, spec.T + 1);
    for (int t = 0; t <= spec.T; ++t) {
      w.col(t) = nrng.uniform_vector(spec.sys.w.lower, spec.sys.w.upper);
      v.col(t) = nrng.uniform_vector(spec.sys.v.lower, spec.sys.v.upper);
    }

    SynthesisResult nom =
        build_nominal_sls(nm.ops, nm.y0_hat, out.innovations.samples,
                          spec.nominal_mode, spec.cost, spec.constraints,
                          spec.solver);
    run_method(spec, d, "nominal", nom, nm, ws, w, v, e_mean, dr.nominal_row,
               dr.nominal_traj);

    SynthesisResult rob = grid_search(
        nm.ops, nm.y0_hat, out.innovations.samples, spec.budget, spec.rho_grid,
        spec.sigma_grid, spec.cost, spec.constraints, 1, spec.solver);
    run_method(spec, d, "drsls", rob, nm, ws, w, v, e_mean, dr.drsls_row,
               dr.drsls_traj);
    return dr;
  });
  return out;
}

}  // namespace drsls
