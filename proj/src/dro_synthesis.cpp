#include "drsls/dro_synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

#include "drsls/norms.hpp"
#include "drsls/parallel.hpp"

namespace drsls {

namespace {

void check_problem_shapes(const StackedOperators& ops, const Eigen::VectorXd& y0_hat,
                          const SampleSet& samples, const CostSpec& cost,
                          const ConstraintSpec& constraints) {
  const int ny = (ops.T + 1) * ops.q;
  const int nu = (ops.T + 1) * ops.m;
  if (y0_hat.size() != ny) throw std::invalid_argument("y0_hat length mismatch");
  if (samples.e.rows() != ny || samples.count() < 1)
    throw std::invalid_argument("sample stack shape mismatch");
  if (cost.w.size() != ny + nu) throw std::invalid_argument("cost weight length mismatch");
  if ((cost.w.array() < 0).any()) throw std::invalid_argument("cost weights must be >= 0");
  for (const auto& stage : constraints.stages) {
    if (stage.pieces.empty()) throw std::invalid_argument("stage constraint without pieces");
    for (const auto& piece : stage.pieces)
      if (piece.a.size() != ny + nu)
        throw std::invalid_argument("constraint piece length mismatch");
  }
}

void check_caps(const GainCaps& caps) {
  if (caps.rho < 0.0 || caps.rho >= 1.0)
    throw std::invalid_argument("rho must lie in [0, 1)");
  if (caps.sigma <= 0.0) throw std::invalid_argument("sigma must be positive");
}

void check_budget(const UncertaintyBudget& b) {
  if (b.gamma1 < 0 || b.gamma2 < 0 || b.gamma3 < 0 || b.kappa < 0)
    throw std::invalid_argument("budget components must be >= 0");
}

// Response-map variables plus the coupling that pins them to the synthesis
// model: Phi_y[t][j] = sum_k G[t][k] Phi_u[k][j] below the diagonal and
// bias_y = G bias_u. The identity diagonal of Phi_y and everything above it
// are never variables.
void add_response_variables(lp::Program& prog, const StackedOperators& ops,
                            DrslsHandles& h) {
  const int T = ops.T, q = ops.q, m = ops.m;
  h.T = T;
  h.q = q;
  h.m = m;
  h.phi_y.assign(T + 1, std::vector<lp::VarHandle>(T + 1));
  h.phi_u.assign(T + 1, std::vector<lp::VarHandle>(T + 1));
  for (int t = 1; t <= T; ++t)
    for (int j = 0; j < t; ++j) {
      h.phi_y[t][j] = prog.add_matrix("Py_" + std::to_string(t) + "_" + std::to_string(j), q, q);
      h.phi_u[t][j] = prog.add_matrix("Pu_" + std::to_string(t) + "_" + std::to_string(j), m, q);
    }
  h.bias_y = prog.add_vector("fy", (T + 1) * q);
  h.bias_u = prog.add_vector("fu", (T + 1) * m);

  auto gblock = [&](int t, int k) { return ops.G.block(t * q, k * m, q, m); };
  for (int t = 1; t <= T; ++t)
    for (int j = 0; j < t; ++j)
      for (int rr = 0; rr < q; ++rr)
        for (int cc = 0; cc < q; ++cc) {
          lp::AffineExpr eq = prog.x(h.phi_y[t][j], rr, cc);
          for (int k = j + 1; k <= t; ++k) {
            auto gb = gblock(t, k);
            for (int s = 0; s < m; ++s)
              eq -= gb(rr, s) * prog.x(h.phi_u[k][j], s, cc);
          }
          prog.add_eq(eq);
        }
  for (int t = 0; t <= T; ++t)
    for (int rr = 0; rr < q; ++rr) {
      lp::AffineExpr eq = prog.x(h.bias_y, t * q + rr);
      for (int k = 0; k <= t; ++k) {
        auto gb = gblock(t, k);
        for (int s = 0; s < m; ++s) eq -= gb(rr, s) * prog.x(h.bias_u, k * m + s);
      }
      prog.add_eq(eq);
    }
}

// Reads the solved variable values back into a concrete parameterization,
// with the structural zeros written as exact zeros.
SlsParam param_from_solution(const lp::Program&, const Eigen::VectorXd& x,
                             const DrslsHandles& h) {
  SlsParam p = SlsParam::zero(h.T, h.m, h.q);
  for (int t = 1; t <= h.T; ++t)
    for (int j = 0; j < t; ++j)
      for (int rr = 0; rr < h.q; ++rr)
        for (int cc = 0; cc < h.q; ++cc)
          p.Phi_y(t * h.q + rr, j * h.q + cc) = x[h.phi_y[t][j].elem(rr, cc)];
  for (int t = 1; t <= h.T; ++t)
    for (int j = 0; j < t; ++j)
      for (int rr = 0; rr < h.m; ++rr)
        for (int cc = 0; cc < h.q; ++cc)
          p.Phi_u(t * h.m + rr, j * h.q + cc) = x[h.phi_u[t][j].elem(rr, cc)];
  for (int i = 0; i < p.ny(); ++i) p.phi_y[i] = x[h.bias_y.elem(i)];
  for (int i = 0; i < p.nu(); ++i) p.phi_u[i] = x[h.bias_u.elem(i)];
  return p;
}

std::vector<lp::AffineExpr> weighted_entries(const std::vector<lp::AffineExpr>& eta,
                                             const Eigen::VectorXd& w) {
  std::vector<lp::AffineExpr> out;
  out.reserve(eta.size());
  for (std::size_t r = 0; r < eta.size(); ++r)
    out.push_back(eta[r] * w[static_cast<Eigen::Index>(r)]);
  return out;
}

lp::AffineExpr piece_expr(const ConstraintPiece& piece,
                          const std::vector<lp::AffineExpr>& eta) {
  lp::AffineExpr e(piece.b);
  for (Eigen::Index r = 0; r < piece.a.size(); ++r)
    if (piece.a[r] != 0.0) e += piece.a[r] * eta[static_cast<std::size_t>(r)];
  return e;
}

SynthesisResult extract_result(const lp::Program& prog, const lp::Solution& sol,
                               const DrslsHandles& h, const StackedOperators& ops,
                               const Eigen::VectorXd& y0_hat, const SampleSet& samples,
                               const GainCaps& caps) {
  SynthesisResult out;
  out.status = sol.status;
  out.iterations = sol.iterations;
  out.rho = caps.rho;
  out.sigma = caps.sigma;
  if (sol.status != lp::SolveStatus::optimal) return out;

  out.objective = sol.objective;
  out.max_residual = sol.max_residual;
  out.param = param_from_solution(prog, sol.x, h);
  out.subspace_residual = validate_subspace(ops.G, out.param);
  out.policy = extract_policy(out.param);
  out.epsilon_bar = h.eps_bar.valid() ? sol.x[h.eps_bar.elem(0)] : 0.0;
  if (h.s.valid()) {
    out.s.resize(h.s.size());
    for (int i = 0; i < h.s.size(); ++i) out.s[i] = sol.x[h.s.elem(i)];
  }
  if (!h.stage_tops.empty()) {
    out.stage_q.resize(static_cast<Eigen::Index>(h.stage_tops.size()), samples.count());
    for (std::size_t k = 0; k < h.stage_tops.size(); ++k)
      for (int i = 0; i < samples.count(); ++i)
        out.stage_q(static_cast<Eigen::Index>(k), i) = sol.x[h.stage_tops[k].elem(i)];
  }
  out.eta_hat.resize(out.param.ny() + out.param.nu(), samples.count());
  for (int i = 0; i < samples.count(); ++i) {
    ClosedLoopResponse r =
        response_from_param(out.param, y0_hat, ops.Theta, samples.e.col(i));
    out.eta_hat.col(i) = r.eta();
  }
  return out;
}

}  // namespace

CostSpec CostSpec::uniform_weights(int T, int q, int m, double y_weight,
                                   double u_weight) {
  CostSpec c;
  c.w.resize((T + 1) * (q + m));
  c.w.head((T + 1) * q).setConstant(y_weight);
  c.w.tail((T + 1) * m).setConstant(u_weight);
  return c;
}

ConstraintSpec ConstraintSpec::output_floor_input_box(int T, int q, int m,
                                                      double y_min, double u_max) {
  ConstraintSpec spec;
  const int ny = (T + 1) * q;
  const int n = ny + (T + 1) * m;
  for (int k = 0; k <= T; ++k) {
    StageConstraint stage;
    for (int r = 0; r < q; ++r) {
      ConstraintPiece p;
      p.a = Eigen::VectorXd::Zero(n);
      p.a[k * q + r] = -1.0;
      p.b = y_min;
      stage.pieces.push_back(std::move(p));
    }
    for (int r = 0; r < m; ++r) {
      ConstraintPiece hi, lo;
      hi.a = Eigen::VectorXd::Zero(n);
      hi.a[ny + k * m + r] = 1.0;
      hi.b = -u_max;
      lo.a = Eigen::VectorXd::Zero(n);
      lo.a[ny + k * m + r] = -1.0;
      lo.b = -u_max;
      stage.pieces.push_back(std::move(hi));
      stage.pieces.push_back(std::move(lo));
    }
    spec.stages.push_back(std::move(stage));
  }
  return spec;
}

lp::AffineExpr DrslsHandles::stacked_entry(const lp::Program& prog, int r, int c) const {
  const int ny = (T + 1) * q;
  const int j = c / q, cc = c % q;
  if (r < ny) {
    const int t = r / q, rr = r % q;
    if (t == j) return lp::AffineExpr(rr == cc ? 1.0 : 0.0);
    if (t < j) return lp::AffineExpr(0.0);
    return prog.x(phi_y[t][j], rr, cc);
  }
  const int i = r - ny;
  const int t = i / m, rr = i % m;
  if (t <= j) return lp::AffineExpr(0.0);
  return prog.x(phi_u[t][j], rr, cc);
}

std::vector<lp::AffineExpr> DrslsHandles::response_exprs(const lp::Program& prog,
                                                         const Eigen::VectorXd& v) const {
  const int ny = (T + 1) * q;
  const int nu = (T + 1) * m;
  std::vector<lp::AffineExpr> out;
  out.reserve(static_cast<std::size_t>(ny + nu));
  for (int r = 0; r < ny; ++r) {
    const int t = r / q, rr = r % q;
    lp::AffineExpr e = prog.x(bias_y, r);
    e += v[r];  // identity diagonal of the output map
    for (int j = 0; j < t; ++j)
      for (int cc = 0; cc < q; ++cc)
        e += v[j * q + cc] * prog.x(phi_y[t][j], rr, cc);
    out.push_back(std::move(e));
  }
  for (int i = 0; i < nu; ++i) {
    const int t = i / m, rr = i % m;
    lp::AffineExpr e = prog.x(bias_u, i);
    for (int j = 0; j < t; ++j)
      for (int cc = 0; cc < q; ++cc)
        e += v[j * q + cc] * prog.x(phi_u[t][j], rr, cc);
    out.push_back(std::move(e));
  }
  return out;
}

double lipschitz_of_cost(const CostSpec& cost) {
  return cost.w.size() == 0 ? 0.0 : cost.w.maxCoeff();
}

double stage_lipschitz(const StageConstraint& stage) {
  double l = 0.0;
  for (const auto& piece : stage.pieces)
    if (piece.a.size() > 0) l = std::max(l, piece.a.cwiseAbs().maxCoeff());
  return l;
}

double lipschitz_of_constraint(const ConstraintSpec& constraints) {
  double l = 0.0;
  for (const auto& stage : constraints.stages) l = std::max(l, stage_lipschitz(stage));
  return l;
}

RadiusCoefficients radius_coefficients(const StackedOperators& ops_hat,
                                       const Eigen::VectorXd& y0_hat,
                                       const SampleSet& samples,
                                       const UncertaintyBudget& budget,
                                       const GainCaps& caps) {
  check_caps(caps);
  check_budget(budget);
  const int N = samples.count();
  double avg_v = 0.0, avg_e = 0.0;
  for (int i = 0; i < N; ++i) {
    avg_v += norm1(y0_hat + ops_hat.Theta * samples.e.col(i));
    avg_e += norm1(samples.e.col(i));
  }
  avg_v /= N;
  avg_e /= N;
  const double theta_norm = induced_norm1(ops_hat.Theta);
  const double denom = 1.0 - caps.rho;
  RadiusCoefficients rc;
  rc.c_phi = (caps.rho * avg_v + budget.gamma2 * avg_e + budget.gamma3) / denom +
             budget.kappa * (theta_norm + budget.gamma2) / denom;
  rc.c_bias = budget.gamma1 > 0.0
                  ? (caps.rho + caps.sigma * budget.gamma1) / denom
                  : 0.0;
  return rc;
}

lp::VarHandle build_radius_constraint(lp::Program& prog,
                                      const StackedOperators& ops_hat,
                                      const Eigen::VectorXd& y0_hat,
                                      const SampleSet& samples,
                                      const UncertaintyBudget& budget,
                                      const GainCaps& caps, DrslsHandles& h) {
  RadiusCoefficients rc = radius_coefficients(ops_hat, y0_hat, samples, budget, caps);

  const int ny = (h.T + 1) * h.q;
  const int nu = (h.T + 1) * h.m;
  lp::MatrixExpr stacked(ny + nu, ny);
  for (int r = 0; r < ny + nu; ++r)
    for (int c = 0; c < ny; ++c) stacked(r, c) = h.stacked_entry(prog, r, c);
  h.t_phi = add_induced1_epigraph(prog, stacked, "t_phi");

  std::vector<lp::AffineExpr> bias_u_entries;
  bias_u_entries.reserve(static_cast<std::size_t>(nu));
  for (int i = 0; i < nu; ++i) bias_u_entries.push_back(prog.x(h.bias_u, i));
  h.t_phiu = add_l1_epigraph(prog, bias_u_entries, "t_fu");

  h.eps_bar = prog.add_scalar("eps_bar");
  prog.add_leq(-prog.x(h.eps_bar));
  prog.add_leq(rc.c_phi * prog.x(h.t_phi) + rc.c_bias * prog.x(h.t_phiu) -
               prog.x(h.eps_bar));
  return h.eps_bar;
}

double eval_radius_bound(const SlsParam& param, const StackedOperators& ops_hat,
                         const Eigen::VectorXd& y0_hat, const SampleSet& samples,
                         const UncertaintyBudget& budget, const GainCaps& caps) {
  // Allowance matches what the solver is asked to deliver, not more.
  const double slack = 1e-6;
  const double phi_u_norm = induced_norm1(param.Phi_u);
  const double phi_y_norm = induced_norm1(param.Phi_y);
  if (budget.gamma1 * phi_u_norm > caps.rho + slack)
    throw std::domain_error("gamma1 * ||Phi_u|| exceeds rho");
  if (phi_y_norm > caps.sigma + slack)
    throw std::domain_error("||Phi_y|| exceeds sigma");
  RadiusCoefficients rc = radius_coefficients(ops_hat, y0_hat, samples, budget, caps);
  return rc.c_phi * stacked_gain_norm(param) + rc.c_bias * norm1(param.phi_u);
}

ShiftTermBounds shift_term_bounds(const SlsParam& param,
                                  const StackedOperators& ops_hat,
                                  const Eigen::VectorXd& y0_hat,
                                  const MismatchRealization& mismatch,
                                  const Eigen::VectorXd& e_sample,
                                  const UncertaintyBudget& budget,
                                  const GainCaps& caps) {
  check_caps(caps);
  const int ny = param.ny();
  const Eigen::MatrixXd DPhi = mismatch.Delta * param.Phi_u;
  const Eigen::MatrixXd M = Eigen::MatrixXd::Identity(ny, ny) - DPhi;
  const Eigen::MatrixXd R =
      solve_unit_block_lower(M, Eigen::MatrixXd::Identity(ny, ny), param.q);
  const Eigen::MatrixXd stackedPhi = param.stacked();
  const double gain = stacked_gain_norm(param);
  const double denom = 1.0 - caps.rho;
  const Eigen::VectorXd v = y0_hat + ops_hat.Theta * e_sample;

  ShiftTermBounds b;
  b.resolvent_lhs = norm1(stackedPhi * ((R - Eigen::MatrixXd::Identity(ny, ny)) * v));
  b.resolvent_rhs = caps.rho / denom * gain * norm1(v);

  b.mismatch_lhs =
      norm1(stackedPhi * (R * (mismatch.y0_tilde + mismatch.Theta_tilde * e_sample)));
  b.mismatch_rhs = gain / denom * (budget.gamma2 * norm1(e_sample) + budget.gamma3);

  const Eigen::VectorXd bias_shift = R * (mismatch.Delta * param.phi_u);
  b.bias_lhs = norm1(stackedPhi * bias_shift);
  b.bias_rhs = (caps.rho + caps.sigma * budget.gamma1) / denom * norm1(param.phi_u);

  b.estimation_lhs =
      budget.kappa * induced_norm1(stackedPhi * (R * (ops_hat.Theta + mismatch.Theta_tilde)));
  b.estimation_rhs =
      budget.kappa / denom * gain * (induced_norm1(ops_hat.Theta) + budget.gamma2);
  return b;
}

DrslsHandles build_drsls(lp::Program& prog, const StackedOperators& ops_hat,
                         const Eigen::VectorXd& y0_hat, const SampleSet& samples,
                         const UncertaintyBudget& budget, const GainCaps& caps,
                         const CostSpec& cost, const ConstraintSpec& constraints) {
  check_caps(caps);
  check_budget(budget);
  check_problem_shapes(ops_hat, y0_hat, samples, cost, constraints);

  DrslsHandles h;
  add_response_variables(prog, ops_hat, h);
  build_radius_constraint(prog, ops_hat, y0_hat, samples, budget, caps, h);

  const int N = samples.count();
  h.s = prog.add_vector("s", N);
  lp::AffineExpr objective = lipschitz_of_cost(cost) * prog.x(h.eps_bar);
  for (int i = 0; i < N; ++i) {
    const Eigen::VectorXd v = y0_hat + ops_hat.Theta * samples.e.col(i);
    std::vector<lp::AffineExpr> eta = h.response_exprs(prog, v);

    lp::VarHandle ti = add_l1_epigraph(prog, weighted_entries(eta, cost.w), "hcost");
    prog.add_leq(prog.x(ti) - prog.x(h.s, i));
    objective += (1.0 / N) * prog.x(h.s, i);

    for (std::size_t k = 0; k < constraints.stages.size(); ++k) {
      if (i == 0)
        h.stage_tops.push_back(prog.add_vector("qc" + std::to_string(k), N));
      std::vector<lp::AffineExpr> pieces;
      for (const auto& piece : constraints.stages[k].pieces)
        pieces.push_back(piece_expr(piece, eta));
      add_max_affine_leq(prog, pieces, prog.x(h.stage_tops[k], i));
    }
  }
  for (std::size_t k = 0; k < constraints.stages.size(); ++k) {
    lp::AffineExpr row = stage_lipschitz(constraints.stages[k]) * prog.x(h.eps_bar);
    for (int i = 0; i < N; ++i) row += (1.0 / N) * prog.x(h.stage_tops[k], i);
    prog.add_leq(row);
  }

  const int ny = (h.T + 1) * h.q;
  const int nu = (h.T + 1) * h.m;
  lp::MatrixExpr Ey(ny, ny);
  for (int r = 0; r < ny; ++r)
    for (int c = 0; c < ny; ++c) Ey(r, c) = h.stacked_entry(prog, r, c);
  h.cap_y = add_induced1_epigraph(prog, Ey, "cap_y");
  prog.add_leq(prog.x(h.cap_y) - caps.sigma);
  if (budget.gamma1 > 0.0) {
    lp::MatrixExpr Eu(nu, ny);
    for (int r = 0; r < nu; ++r)
      for (int c = 0; c < ny; ++c) Eu(r, c) = h.stacked_entry(prog, ny + r, c);
    h.cap_u = add_induced1_epigraph(prog, Eu, "cap_u");
    prog.add_leq(prog.x(h.cap_u) - caps.rho / budget.gamma1);
  }

  prog.minimize(objective);
  return h;
}

SynthesisResult solve_drsls(const StackedOperators& ops_hat,
                            const Eigen::VectorXd& y0_hat, const SampleSet& samples,
                            const UncertaintyBudget& budget, const GainCaps& caps,
                            const CostSpec& cost, const ConstraintSpec& constraints,
                            const lp::SolveOptions& opts) {
  lp::Program prog;
  DrslsHandles h = build_drsls(prog, ops_hat, y0_hat, samples, budget, caps, cost,
                               constraints);
  lp::Solution sol = prog.solve(opts);
  return extract_result(prog, sol, h, ops_hat, y0_hat, samples, caps);
}

SynthesisResult grid_search(const StackedOperators& ops_hat,
                            const Eigen::VectorXd& y0_hat, const SampleSet& samples,
                            const UncertaintyBudget& budget,
                            const std::vector<double>& rho_grid,
                            const std::vector<double>& sigma_grid,
                            const CostSpec& cost, const ConstraintSpec& constraints,
                            int threads, const lp::SolveOptions& opts) {
  if (rho_grid.empty() || sigma_grid.empty())
    throw std::invalid_argument("grids must be nonempty");

  // Ascending order makes "first strictly better wins" the smaller-rho,
  // then smaller-sigma tie break.
  std::vector<double> rhos = rho_grid, sigmas = sigma_grid;
  std::sort(rhos.begin(), rhos.end());
  std::sort(sigmas.begin(), sigmas.end());
  std::vector<GainCaps> points;
  for (double r : rhos)
    for (double s : sigmas) points.push_back({r, s});

  std::vector<SynthesisResult> results = parallel_map<SynthesisResult>(
      static_cast<int>(points.size()), threads, [&](int idx) {
        return solve_drsls(ops_hat, y0_hat, samples, budget, points[static_cast<std::size_t>(idx)],
                           cost, constraints, opts);
      });

  std::vector<GridEntry> table;
  int best = -1;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const SynthesisResult& r = results[i];
    table.push_back({r.rho, r.sigma, r.status, r.objective, r.epsilon_bar});
    if (r.status != lp::SolveStatus::optimal) continue;
    if (best < 0 || r.objective < results[static_cast<std::size_t>(best)].objective)
      best = static_cast<int>(i);
  }
  if (best < 0) {
    SynthesisResult out;
    bool any_failure = false;
    for (const auto& r : results)
      if (r.status == lp::SolveStatus::numerical_failure ||
          r.status == lp::SolveStatus::unbounded)
        any_failure = true;
    out.status = any_failure ? lp::SolveStatus::numerical_failure
                             : lp::SolveStatus::infeasible;
    out.table = std::move(table);
    return out;
  }
  SynthesisResult out = std::move(results[static_cast<std::size_t>(best)]);
  out.table = std::move(table);
  return out;
}

SynthesisResult build_nominal_sls(const StackedOperators& ops_hat,
                                  const Eigen::VectorXd& y0_hat,
                                  const SampleSet& samples, NominalMode mode,
                                  const CostSpec& cost,
                                  const ConstraintSpec& constraints,
                                  const lp::SolveOptions& opts) {
  check_problem_shapes(ops_hat, y0_hat, samples, cost, constraints);
  lp::Program prog;
  DrslsHandles h;
  add_response_variables(prog, ops_hat, h);

  if (mode == NominalMode::mean_certainty_equivalent) {
    const Eigen::VectorXd v = y0_hat + ops_hat.Theta * samples.mean();
    std::vector<lp::AffineExpr> eta = h.response_exprs(prog, v);
    h.s = prog.add_vector("s", 1);
    lp::VarHandle t = add_l1_epigraph(prog, weighted_entries(eta, cost.w), "hcost");
    prog.add_leq(prog.x(t) - prog.x(h.s, 0));
    for (const auto& stage : constraints.stages) {
      std::vector<lp::AffineExpr> pieces;
      for (const auto& piece : stage.pieces) pieces.push_back(piece_expr(piece, eta));
      add_max_affine_leq(prog, pieces, lp::AffineExpr(0.0));
    }
    prog.minimize(prog.x(h.s, 0));
  } else {
    const int N = samples.count();
    h.s = prog.add_vector("s", N);
    lp::AffineExpr objective;
    for (int i = 0; i < N; ++i) {
      const Eigen::VectorXd v = y0_hat + ops_hat.Theta * samples.e.col(i);
      std::vector<lp::AffineExpr> eta = h.response_exprs(prog, v);
      lp::VarHandle ti = add_l1_epigraph(prog, weighted_entries(eta, cost.w), "hcost");
      prog.add_leq(prog.x(ti) - prog.x(h.s, i));
      objective += (1.0 / N) * prog.x(h.s, i);
      for (std::size_t k = 0; k < constraints.stages.size(); ++k) {
        if (i == 0)
          h.stage_tops.push_back(prog.add_vector("qc" + std::to_string(k), N));
        std::vector<lp::AffineExpr> pieces;
        for (const auto& piece : constraints.stages[k].pieces)
          pieces.push_back(piece_expr(piece, eta));
        add_max_affine_leq(prog, pieces, prog.x(h.stage_tops[k], i));
      }
    }
    for (std::size_t k = 0; k < constraints.stages.size(); ++k) {
      lp::AffineExpr row;
      for (int i = 0; i < N; ++i) row += (1.0 / N) * prog.x(h.stage_tops[k], i);
      prog.add_leq(row);
    }
    prog.minimize(objective);
  }

  lp::Solution sol = prog.solve(opts);
  GainCaps none{0.0, 0.0};
  return extract_result(prog, sol, h, ops_hat, y0_hat, samples, none);
}

}  // namespace drsls
