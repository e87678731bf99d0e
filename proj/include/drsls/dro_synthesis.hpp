#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "drsls/lp_kernel.hpp"
#include "drsls/lti_model.hpp"
#include "drsls/sls_core.hpp"

namespace drsls {

// Bounds on what separates the synthesis model from the plant it will run
// against: gamma1 caps the lifted input-map error ||G - Ghat||, gamma2 the
// innovation-map error ||Theta - ThetaHat||, gamma3 the free-response error
// ||y0 - y0hat|| (all induced/vector 1-norms), and kappa caps the Wasserstein
// distance between the empirical innovation distribution and the real one.
struct UncertaintyBudget {
  double gamma1 = 0.0;
  double gamma2 = 0.0;
  double gamma3 = 0.0;
  double kappa = 0.0;
};

// Premise parameters of the robust reformulation: the synthesis enforces
// gamma1*||Phi_u|| <= rho (rho < 1 keeps the mismatch resolvent a convergent
// Neumann series) and ||Phi_y|| <= sigma. Both caps also linearize the
// radius bound.
struct GainCaps {
  double rho = 0.0;
  double sigma = 1.0;
};

// Stage cost h(eta) = || diag(w) * eta ||_1 over eta = col(y, u).
struct CostSpec {
  Eigen::VectorXd w;

  static CostSpec uniform_weights(int T, int q, int m, double y_weight,
                                  double u_weight);
};

// One affine piece a'eta + b of a pointwise-max constraint.
struct ConstraintPiece {
  Eigen::VectorXd a;  // sparse in practice; full length (T+1)(q+m)
  double b = 0.0;
};

// g_k(eta) = max_i (a_i'eta + b_i) <= 0 for one stage k.
struct StageConstraint {
  std::vector<ConstraintPiece> pieces;
};

struct ConstraintSpec {
  std::vector<StageConstraint> stages;

  // Per-stage output floor y_k >= y_min plus input box |u_k| <= u_max, the
  // usual safety envelope. One stage constraint per step 0..T.
  static ConstraintSpec output_floor_input_box(int T, int q, int m,
                                               double y_min, double u_max);
};

// N innovation-stack samples, one per column; equal weights 1/N.
struct SampleSet {
  Eigen::MatrixXd e;  // (T+1)q x N

  int count() const { return static_cast<int>(e.cols()); }
  Eigen::VectorXd mean() const { return e.rowwise().mean(); }
};

// Handles into the synthesis program, exposed so the radius constraint and
// the tests can address individual blocks. Structural zeros of the response
// maps are never materialized as variables: phi_y[t][j] and phi_u[t][j]
// exist only for t > j (the Phi_y diagonal is the fixed identity).
struct DrslsHandles {
  int T = 0, q = 0, m = 0;
  std::vector<std::vector<lp::VarHandle>> phi_y;  // q x q blocks, t > j
  std::vector<std::vector<lp::VarHandle>> phi_u;  // m x q blocks, t > j
  lp::VarHandle bias_y, bias_u;                   // (T+1)q, (T+1)m
  lp::VarHandle eps_bar;                          // radius variable
  lp::VarHandle s;                                // per-sample cost tops
  std::vector<lp::VarHandle> stage_tops;          // q_{k,i}: one N-vector per stage
  lp::VarHandle t_phi;    // || [Phi_y; Phi_u] || epigraph in the radius bound
  lp::VarHandle t_phiu;   // || bias_u ||_1 epigraph in the radius bound
  lp::VarHandle cap_y;    // || Phi_y || epigraph for the sigma cap
  lp::VarHandle cap_u;    // || Phi_u || epigraph for the rho/gamma1 cap (if any)

  // Entry (r, c) of the stacked response map [Phi_y; Phi_u] as an expression
  // over the block variables; exact zeros and the identity diagonal come back
  // as constants.
  lp::AffineExpr stacked_entry(const lp::Program& prog, int r, int c) const;

  // eta_hat(v) = [Phi_y; Phi_u] * v + col(bias_y, bias_u) for a constant v.
  std::vector<lp::AffineExpr> response_exprs(const lp::Program& prog,
                                             const Eigen::VectorXd& v) const;
};

enum class NominalMode {
  mean_certainty_equivalent,  // plug in the sample mean, pointwise constraints
  sample_average,             // average cost and constraints over all samples
};

struct GridEntry {
  double rho = 0.0, sigma = 0.0;
  lp::SolveStatus status = lp::SolveStatus::numerical_failure;
  double objective = std::nan("");
  double epsilon_bar = std::nan("");
};

struct SynthesisResult {
  lp::SolveStatus status = lp::SolveStatus::numerical_failure;
  SlsParam param;
  AffinePolicy policy;
  double epsilon_bar = 0.0;
  double objective = std::nan("");
  double rho = 0.0, sigma = 0.0;
  Eigen::MatrixXd eta_hat;   // (T+1)(q+m) x N predicted responses
  Eigen::VectorXd s;         // cost epigraph values
  Eigen::MatrixXd stage_q;   // stages x N constraint epigraph values
  double max_residual = std::nan("");       // independent feasibility recheck
  double subspace_residual = std::nan("");  // against the synthesis model
  int iterations = 0;
  std::vector<GridEntry> table;  // filled by grid_search
};

// Largest ratio |h(a)-h(b)| / ||a-b||_1 the cost can attain.
double lipschitz_of_cost(const CostSpec& cost);

// Same constant for the pointwise-max constraints (max over pieces of
// ||a||_inf); aggregate over all stages.
double lipschitz_of_constraint(const ConstraintSpec& constraints);
double stage_lipschitz(const StageConstraint& stage);

// Constant coefficients (c_phi, c_bias) of the linearized radius bound
//   eps_bar >= c_phi * ||[Phi_y; Phi_u]|| + c_bias * ||phi_u||_1.
// c_phi collects the sample-averaged mismatch terms and the innovation
// estimation term; c_bias carries the bias-shift term, exactly zero when
// gamma1 = 0 (no input-map mismatch means no bias shift).
struct RadiusCoefficients {
  double c_phi = 0.0;
  double c_bias = 0.0;
};
RadiusCoefficients radius_coefficients(const StackedOperators& ops_hat,
                                       const Eigen::VectorXd& y0_hat,
                                       const SampleSet& samples,
                                       const UncertaintyBudget& budget,
                                       const GainCaps& caps);

// Adds eps_bar (>= 0) and the linear radius constraint to the program;
// returns the eps_bar handle and records the epigraph handles in `handles`.
lp::VarHandle build_radius_constraint(lp::Program& prog,
                                      const StackedOperators& ops_hat,
                                      const Eigen::VectorXd& y0_hat,
                                      const SampleSet& samples,
                                      const UncertaintyBudget& budget,
                                      const GainCaps& caps,
                                      DrslsHandles& handles);

// Evaluates the same bound for a concrete parameterization. Requires the cap
// premises gamma1*||Phi_u|| <= rho and ||Phi_y|| <= sigma (throws
// std::domain_error otherwise).
double eval_radius_bound(const SlsParam& param, const StackedOperators& ops_hat,
                         const Eigen::VectorXd& y0_hat, const SampleSet& samples,
                         const UncertaintyBudget& budget, const GainCaps& caps);

// Left and right sides of the four inequalities that make up the radius
// bound, evaluated for one concrete mismatch draw and one sample. Every lhs
// must stay below its rhs whenever the draw respects the budget and the
// parameterization respects the caps.
struct ShiftTermBounds {
  double resolvent_lhs = 0.0, resolvent_rhs = 0.0;    // Phi*(R-I)*v term
  double mismatch_lhs = 0.0, mismatch_rhs = 0.0;      // Phi*R*(y0~ + Theta~ e) term
  double bias_lhs = 0.0, bias_rhs = 0.0;              // (R_phi - I)*phi term
  double estimation_lhs = 0.0, estimation_rhs = 0.0;  // kappa * ||Phi*R*Theta|| term
};
ShiftTermBounds shift_term_bounds(const SlsParam& param,
                                  const StackedOperators& ops_hat,
                                  const Eigen::VectorXd& y0_hat,
                                  const MismatchRealization& mismatch,
                                  const Eigen::VectorXd& e_sample,
                                  const UncertaintyBudget& budget,
                                  const GainCaps& caps);

// Assembles the full robust synthesis program: response-map variables with
// their subspace coupling, per-sample predicted responses, cost epigraphs,
// per-stage averaged constraint rows tightened by eps_bar, the radius
// constraint, and the gain caps. The gamma1 = 0 case drops the Phi_u cap.
DrslsHandles build_drsls(lp::Program& prog, const StackedOperators& ops_hat,
                         const Eigen::VectorXd& y0_hat, const SampleSet& samples,
                         const UncertaintyBudget& budget, const GainCaps& caps,
                         const CostSpec& cost, const ConstraintSpec& constraints);

SynthesisResult solve_drsls(const StackedOperators& ops_hat,
                            const Eigen::VectorXd& y0_hat,
                            const SampleSet& samples,
                            const UncertaintyBudget& budget, const GainCaps& caps,
                            const CostSpec& cost,
                            const ConstraintSpec& constraints,
                            const lp::SolveOptions& opts = {});

// Solves one program per (rho, sigma) pair and keeps the best feasible
// result; ties go to the smaller rho, then the smaller sigma. The full
// (rho, sigma, status, objective) table is recorded on the winner. All grid
// points infeasible returns a result with the table and a non-optimal status.
SynthesisResult grid_search(const StackedOperators& ops_hat,
                            const Eigen::VectorXd& y0_hat,
                            const SampleSet& samples,
                            const UncertaintyBudget& budget,
                            const std::vector<double>& rho_grid,
                            const std::vector<double>& sigma_grid,
                            const CostSpec& cost,
                            const ConstraintSpec& constraints,
                            int threads = 0,
                            const lp::SolveOptions& opts = {});

// The plain synthesis on the nominal model, no robustness terms. The
// mean-certainty-equivalent mode optimizes the response at the sample mean
// under pointwise constraints; the sample-average mode optimizes the
// empirical average cost under sample-averaged constraints and is exactly
// the zero-budget, zero-rho limit of the robust program.
SynthesisResult build_nominal_sls(const StackedOperators& ops_hat,
                                  const Eigen::VectorXd& y0_hat,
                                  const SampleSet& samples, NominalMode mode,
                                  const CostSpec& cost,
                                  const ConstraintSpec& constraints,
                                  const lp::SolveOptions& opts = {});

}  // namespace drsls
