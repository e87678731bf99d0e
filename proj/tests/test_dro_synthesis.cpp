#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <Eigen/Dense>
#include <cmath>
#include <limits>

#include "doctest.h"
#include "drsls/dro_synthesis.hpp"
#include "drsls/lti_model.hpp"
#include "drsls/norms.hpp"
#include "drsls/rng.hpp"
#include "drsls/sls_core.hpp"
#include "test_util.hpp"

using namespace drsls;

namespace {

SampleSet fixed_samples(RngStream& rng, int ny, int N, double amp = 0.5) {
  SampleSet s;
  s.e = rng.uniform_matrix(ny, N, -amp, amp);
  return s;
}

double cost_value(const CostSpec& cost, const Eigen::VectorXd& eta) {
  return (cost.w.array() * eta.array()).abs().sum();
}

double stage_value(const StageConstraint& stage, const Eigen::VectorXd& eta) {
  double v = -std::numeric_limits<double>::infinity();
  for (const auto& piece : stage.pieces) v = std::max(v, piece.a.dot(eta) + piece.b);
  return v;
}

// Strictly block-lower perturbation scaled so each component sits at `frac`
// of its budget cap.
MismatchRealization budget_mismatch(RngStream& rng, int T, int m, int q,
                                    const UncertaintyBudget& b, double frac) {
  MismatchRealization mm;
  const int ny = (T + 1) * q, nu = (T + 1) * m;
  mm.Delta = Eigen::MatrixXd::Zero(ny, nu);
  mm.Theta_tilde = Eigen::MatrixXd::Zero(ny, ny);
  for (int i = 1; i <= T; ++i)
    for (int j = 0; j < i; ++j) {
      mm.Delta.block(i * q, j * m, q, m) = rng.uniform_matrix(q, m, -1.0, 1.0);
      mm.Theta_tilde.block(i * q, j * q, q, q) = rng.uniform_matrix(q, q, -1.0, 1.0);
    }
  mm.y0_tilde = rng.uniform_vector(ny, -1.0, 1.0);
  const double nd = induced_norm1(mm.Delta);
  if (nd > 0) mm.Delta *= frac * b.gamma1 / nd;
  const double nt = induced_norm1(mm.Theta_tilde);
  if (nt > 0) mm.Theta_tilde *= frac * b.gamma2 / nt;
  const double n0 = norm1(mm.y0_tilde);
  if (n0 > 0) mm.y0_tilde *= frac * b.gamma3 / n0;
  return mm;
}

}  // namespace

TEST_CASE("lipschitz constants match their definitions") {
  CostSpec c1 = CostSpec::uniform_weights(3, 1, 1, 1.0, 0.4);
  CHECK(lipschitz_of_cost(c1) == 1.0);
  CostSpec c2 = CostSpec::uniform_weights(3, 1, 1, 0.2, 0.7);
  CHECK(lipschitz_of_cost(c2) == 0.7);

  ConstraintSpec box = ConstraintSpec::output_floor_input_box(3, 1, 1, -0.1, 1.0);
  CHECK(box.stages.size() == 4);
  CHECK(box.stages[0].pieces.size() == 3);
  CHECK(lipschitz_of_constraint(box) == 1.0);

  // Sampling can never beat the constant, and perturbing the heaviest
  // coordinate attains it for the weighted 1-norm cost.
  RngStream rng = RngStream::derive(81, RngPurpose::test_fixture, 0);
  CostSpec rc;
  rc.w = rng.uniform_vector(8, 0.0, 1.2);
  const double lh = lipschitz_of_cost(rc);
  int arg = 0;
  rc.w.maxCoeff(&arg);
  for (int trial = 0; trial < 2000; ++trial) {
    const Eigen::VectorXd a = rng.uniform_vector(8, -2.0, 2.0);
    const Eigen::VectorXd b = rng.uniform_vector(8, -2.0, 2.0);
    CHECK(std::abs(cost_value(rc, a) - cost_value(rc, b)) <=
          lh * norm1(a - b) + 1e-12);
  }
  Eigen::VectorXd base = rng.uniform_vector(8, 0.5, 1.0);
  Eigen::VectorXd bumped = base;
  bumped[arg] += 0.25;
  CHECK(std::abs(cost_value(rc, bumped) - cost_value(rc, base)) ==
        doctest::Approx(lh * 0.25).epsilon(1e-12));

  StageConstraint stage;
  double linf = 0.0;
  for (int k = 0; k < 3; ++k) {
    ConstraintPiece p;
    p.a = rng.uniform_vector(8, -1.5, 1.5);
    p.b = rng.uniform(-0.5, 0.5);
    linf = std::max(linf, p.a.cwiseAbs().maxCoeff());
    stage.pieces.push_back(p);
  }
  CHECK(stage_lipschitz(stage) == linf);
  for (int trial = 0; trial < 2000; ++trial) {
    const Eigen::VectorXd a = rng.uniform_vector(8, -2.0, 2.0);
    const Eigen::VectorXd b = rng.uniform_vector(8, -2.0, 2.0);
    CHECK(std::abs(stage_value(stage, a) - stage_value(stage, b)) <=
          linf * norm1(a - b) + 1e-12);
  }
}

TEST_CASE("radius coefficients follow the averaged mismatch terms") {
  const InnovationModel md = testutil::scalar_model();
  const StackedOperators ops = stacked_operators(md, 3);
  RngStream rng = RngStream::derive(82, RngPurpose::test_fixture, 0);
  const int ny = 4;
  SampleSet samples = fixed_samples(rng, ny, 4);
  const Eigen::VectorXd y0 = rng.uniform_vector(ny, -0.5, 0.5);

  UncertaintyBudget b{0.05, 0.02, 0.01, 0.005};
  GainCaps caps{0.2, 1.5};
  RadiusCoefficients rc = radius_coefficients(ops, y0, samples, b, caps);

  double avg_v = 0.0, avg_e = 0.0;
  for (int i = 0; i < 4; ++i) {
    avg_v += Eigen::VectorXd(y0 + ops.Theta * samples.e.col(i)).lpNorm<1>() / 4.0;
    avg_e += samples.e.col(i).lpNorm<1>() / 4.0;
  }
  const double theta1 = ops.Theta.cwiseAbs().colwise().sum().maxCoeff();
  const double denom = 1.0 - caps.rho;
  CHECK(rc.c_phi ==
        doctest::Approx((caps.rho * avg_v + b.gamma2 * avg_e + b.gamma3) / denom +
                        b.kappa * (theta1 + b.gamma2) / denom)
            .epsilon(1e-12));
  CHECK(rc.c_bias ==
        doctest::Approx((caps.rho + caps.sigma * b.gamma1) / denom).epsilon(1e-12));

  // No input-map mismatch: the bias term vanishes identically, not just
  // approximately.
  UncertaintyBudget b0 = b;
  b0.gamma1 = 0.0;
  CHECK(radius_coefficients(ops, y0, samples, b0, caps).c_bias == 0.0);

  UncertaintyBudget zero;
  GainCaps still{0.0, 1.5};
  RadiusCoefficients rz = radius_coefficients(ops, y0, samples, zero, still);
  CHECK(rz.c_phi == 0.0);
  CHECK(rz.c_bias == 0.0);

  // One sample at e = 0 with y0 = 0 and only gamma1 active: every averaged
  // term is zero and the bias coefficient alone survives.
  SampleSet one;
  one.e = Eigen::MatrixXd::Zero(ny, 1);
  UncertaintyBudget bias_only{0.1, 0.0, 0.0, 0.0};
  RadiusCoefficients rb = radius_coefficients(ops, Eigen::VectorXd::Zero(ny), one,
                                              bias_only, caps);
  CHECK(rb.c_phi == 0.0);
  CHECK(rb.c_bias == doctest::Approx((0.2 + 1.5 * 0.1) / 0.8).epsilon(1e-12));

  GainCaps bad{1.0, 1.0};
  CHECK_THROWS_AS(radius_coefficients(ops, y0, samples, b, bad),
                  std::invalid_argument);
}

TEST_CASE("radius bound evaluation enforces the cap premises") {
  const InnovationModel md = testutil::scalar_model();
  const StackedOperators ops = stacked_operators(md, 3);
  RngStream rng = RngStream::derive(83, RngPurpose::test_fixture, 0);
  SampleSet samples = fixed_samples(rng, 4, 3);
  const Eigen::VectorXd y0 = rng.uniform_vector(4, -0.5, 0.5);
  UncertaintyBudget b{0.05, 0.02, 0.01, 0.005};
  GainCaps caps{0.2, 1.5};

  SlsParam idle = SlsParam::zero(3, 1, 1);
  RadiusCoefficients rc = radius_coefficients(ops, y0, samples, b, caps);
  CHECK(eval_radius_bound(idle, ops, y0, samples, b, caps) ==
        doctest::Approx(rc.c_phi).epsilon(1e-12));

  SlsParam hot = idle;
  hot.Phi_u(1, 0) = 100.0;
  CHECK_THROWS_AS(eval_radius_bound(hot, ops, y0, samples, b, caps),
                  std::domain_error);
  GainCaps tight{0.2, 0.5};
  CHECK_THROWS_AS(eval_radius_bound(idle, ops, y0, samples, b, tight),
                  std::domain_error);
}

TEST_CASE("synthesis output survives its own feasibility recheck") {
  const InnovationModel md = testutil::benchmark_model();
  const int T = 6;
  const StackedOperators ops = stacked_operators(md, T);
  RngStream rng = RngStream::derive(84, RngPurpose::test_fixture, 0);
  SampleSet samples = fixed_samples(rng, (T + 1), 8, 0.3);
  const Eigen::VectorXd y0 = rng.uniform_vector(T + 1, -0.3, 0.3);
  UncertaintyBudget budget{0.05, 0.03, 0.02, 0.01};
  GainCaps caps{0.15, 2.0};
  CostSpec cost = CostSpec::uniform_weights(T, 1, 1, 1.0, 0.4);
  ConstraintSpec cons = ConstraintSpec::output_floor_input_box(T, 1, 1, -3.0, 2.0);

  SynthesisResult out = solve_drsls(ops, y0, samples, budget, caps, cost, cons);
  REQUIRE(out.status == lp::SolveStatus::optimal);
  CHECK(out.max_residual <= 1e-7);
  CHECK(validate_structure(out.param));
  CHECK(out.subspace_residual <= 1e-8);

  // The policy realizes the parameterization on the synthesis model.
  SlsParam round = params_from_policy(out.policy, ops.G);
  CHECK(max_abs(Eigen::MatrixXd(round.Phi_y - out.param.Phi_y)) < 1e-8);
  CHECK(max_abs(Eigen::MatrixXd(round.Phi_u - out.param.Phi_u)) < 1e-8);
  CHECK(norm1(round.phi_u - out.param.phi_u) < 1e-8);

  // Cost epigraphs are tight at the optimum; constraint epigraphs are valid
  // and the averaged tightened rows hold.
  const double l_h = lipschitz_of_cost(cost);
  double avg_s = 0.0;
  for (int i = 0; i < samples.count(); ++i) {
    CHECK(out.s[i] == doctest::Approx(cost_value(cost, out.eta_hat.col(i)))
                          .epsilon(1e-5));
    avg_s += out.s[i] / samples.count();
  }
  CHECK(out.objective ==
        doctest::Approx(l_h * out.epsilon_bar + avg_s).epsilon(1e-6));
  for (std::size_t k = 0; k < cons.stages.size(); ++k) {
    double avg_q = 0.0;
    for (int i = 0; i < samples.count(); ++i) {
      CHECK(out.stage_q(static_cast<Eigen::Index>(k), i) >=
            stage_value(cons.stages[k], out.eta_hat.col(i)) - 1e-7);
      avg_q += out.stage_q(static_cast<Eigen::Index>(k), i) / samples.count();
    }
    CHECK(stage_lipschitz(cons.stages[k]) * out.epsilon_bar + avg_q <= 1e-7);
  }

  // The radius row is active at the optimum, so the solved eps_bar equals
  // the bound evaluated at the solved parameterization.
  const double bound = eval_radius_bound(out.param, ops, y0, samples, budget, caps);
  CHECK(out.epsilon_bar == doctest::Approx(bound).epsilon(1e-5));

  // The caps actually hold at the solution.
  CHECK(induced_norm1(out.param.Phi_y) <= caps.sigma + 1e-7);
  CHECK(budget.gamma1 * induced_norm1(out.param.Phi_u) <= caps.rho + 1e-7);
}

TEST_CASE("term bounds dominate every in-budget mismatch draw") {
  const InnovationModel md = testutil::benchmark_model();
  const int T = 6;
  const StackedOperators ops = stacked_operators(md, T);
  RngStream rng = RngStream::derive(85, RngPurpose::test_fixture, 0);
  SampleSet samples = fixed_samples(rng, T + 1, 8, 0.3);
  const Eigen::VectorXd y0 = rng.uniform_vector(T + 1, -0.3, 0.3);
  UncertaintyBudget budget{0.05, 0.03, 0.02, 0.01};
  GainCaps caps{0.15, 2.0};
  CostSpec cost = CostSpec::uniform_weights(T, 1, 1, 1.0, 0.4);
  ConstraintSpec cons = ConstraintSpec::output_floor_input_box(T, 1, 1, -3.0, 2.0);
  SynthesisResult out = solve_drsls(ops, y0, samples, budget, caps, cost, cons);
  REQUIRE(out.status == lp::SolveStatus::optimal);

  const double bound = eval_radius_bound(out.param, ops, y0, samples, budget, caps);
  RngStream draws = RngStream::derive(85, RngPurpose::mismatch_draw, 0);
  for (int d = 0; d < 25; ++d) {
    const double frac = 0.1 + 0.9 * (d / 24.0);
    MismatchRealization mm = budget_mismatch(draws, T, 1, 1, budget, frac);

    for (int i = 0; i < 3; ++i) {
      ShiftTermBounds tb =
          shift_term_bounds(out.param, ops, y0, mm, samples.e.col(i), budget, caps);
      CHECK(tb.resolvent_lhs <= tb.resolvent_rhs + 1e-10);
      CHECK(tb.mismatch_lhs <= tb.mismatch_rhs + 1e-10);
      CHECK(tb.bias_lhs <= tb.bias_rhs + 1e-10);
      CHECK(tb.estimation_lhs <= tb.estimation_rhs + 1e-10);
    }

    // The bound covers the realized average response shift.
    double avg_shift = 0.0;
    for (int i = 0; i < samples.count(); ++i) {
      TrueResponse tr =
          true_response_under_mismatch(out.param, mm, y0, ops.Theta, samples.e.col(i));
      avg_shift += norm1(tr.response.eta() - out.eta_hat.col(i)) / samples.count();
    }
    CHECK(avg_shift <= bound + 1e-9);
  }
}

TEST_CASE("zero budget and zero rho reduce to the sample average program") {
  const InnovationModel md = testutil::benchmark_model();
  const int T = 5;
  const StackedOperators ops = stacked_operators(md, T);
  RngStream rng = RngStream::derive(86, RngPurpose::test_fixture, 0);
  SampleSet samples = fixed_samples(rng, T + 1, 10, 0.3);
  const Eigen::VectorXd y0 = rng.uniform_vector(T + 1, -0.3, 0.3);
  CostSpec cost = CostSpec::uniform_weights(T, 1, 1, 1.0, 0.4);
  ConstraintSpec cons = ConstraintSpec::output_floor_input_box(T, 1, 1, -3.0, 2.0);

  UncertaintyBudget zero;
  GainCaps wide{0.0, 100.0};
  SynthesisResult dr = solve_drsls(ops, y0, samples, zero, wide, cost, cons);
  SynthesisResult saa = build_nominal_sls(ops, y0, samples,
                                          NominalMode::sample_average, cost, cons);
  REQUIRE(dr.status == lp::SolveStatus::optimal);
  REQUIRE(saa.status == lp::SolveStatus::optimal);
  CHECK(dr.epsilon_bar <= 1e-9);
  CHECK(std::abs(dr.objective - saa.objective) <=
        1e-6 * (1.0 + std::abs(saa.objective)));
}

TEST_CASE("radius and objective grow with the budget") {
  const InnovationModel md = testutil::scalar_model();
  const int T = 5;
  const StackedOperators ops = stacked_operators(md, T);
  RngStream rng = RngStream::derive(87, RngPurpose::test_fixture, 0);
  SampleSet samples = fixed_samples(rng, T + 1, 6, 0.3);
  const Eigen::VectorXd y0 = rng.uniform_vector(T + 1, -0.3, 0.3);
  CostSpec cost = CostSpec::uniform_weights(T, 1, 1, 1.0, 0.4);
  ConstraintSpec cons = ConstraintSpec::output_floor_input_box(T, 1, 1, -3.0, 2.0);
  GainCaps caps{0.1, 2.0};

  double prev_eps = -1.0, prev_obj = -1e30;
  for (double scale : {1.0, 2.0, 4.0}) {
    UncertaintyBudget b{0.01 * scale, 0.01 * scale, 0.01 * scale, 0.005 * scale};
    SynthesisResult out = solve_drsls(ops, y0, samples, b, caps, cost, cons);
    REQUIRE(out.status == lp::SolveStatus::optimal);
    CHECK(out.epsilon_bar >= prev_eps - 1e-9);
    CHECK(out.objective >= prev_obj - 1e-9);
    prev_eps = out.epsilon_bar;
    prev_obj = out.objective;
  }
}

TEST_CASE("no input-map budget means no input gain cap") {
  const InnovationModel md = testutil::scalar_model();
  const int T = 3;
  const StackedOperators ops = stacked_operators(md, T);
  RngStream rng = RngStream::derive(88, RngPurpose::test_fixture, 0);
  SampleSet samples = fixed_samples(rng, T + 1, 4, 0.3);
  const Eigen::VectorXd y0 = rng.uniform_vector(T + 1, -0.3, 0.3);
  CostSpec cost = CostSpec::uniform_weights(T, 1, 1, 1.0, 0.4);
  ConstraintSpec cons = ConstraintSpec::output_floor_input_box(T, 1, 1, -3.0, 2.0);
  GainCaps caps{0.1, 2.0};

  lp::Program without;
  UncertaintyBudget b0{0.0, 0.01, 0.01, 0.0};
  DrslsHandles h0 = build_drsls(without, ops, y0, samples, b0, caps, cost, cons);
  CHECK(!h0.cap_u.valid());
  CHECK(h0.cap_y.valid());

  lp::Program with;
  UncertaintyBudget b1{0.02, 0.01, 0.01, 0.0};
  DrslsHandles h1 = build_drsls(with, ops, y0, samples, b1, caps, cost, cons);
  CHECK(h1.cap_u.valid());
  CHECK(with.num_ineqs() > without.num_ineqs());
}

TEST_CASE("grid search matches the single solve and filters infeasible points") {
  const InnovationModel md = testutil::scalar_model();
  const int T = 4;
  const StackedOperators ops = stacked_operators(md, T);
  RngStream rng = RngStream::derive(89, RngPurpose::test_fixture, 0);
  SampleSet samples = fixed_samples(rng, T + 1, 5, 0.3);
  const Eigen::VectorXd y0 = rng.uniform_vector(T + 1, -0.3, 0.3);
  CostSpec cost = CostSpec::uniform_weights(T, 1, 1, 1.0, 0.4);
  ConstraintSpec cons = ConstraintSpec::output_floor_input_box(T, 1, 1, -3.0, 2.0);
  UncertaintyBudget budget{0.0, 0.02, 0.01, 0.005};

  SynthesisResult single = solve_drsls(ops, y0, samples, budget, {0.1, 2.0}, cost, cons);
  SynthesisResult grid1 = grid_search(ops, y0, samples, budget, {0.1}, {2.0}, cost, cons);
  REQUIRE(single.status == lp::SolveStatus::optimal);
  REQUIRE(grid1.status == lp::SolveStatus::optimal);
  CHECK(grid1.objective == doctest::Approx(single.objective).epsilon(1e-12));
  CHECK(grid1.epsilon_bar == doctest::Approx(single.epsilon_bar).epsilon(1e-12));
  CHECK(grid1.table.size() == 1);

  // ||Phi_y|| >= 1 always (identity diagonal), so sigma = 0.5 cannot be met.
  // With gamma1 = 0 the radius grows with rho and nothing else moves, so the
  // smaller rho must win.
  SynthesisResult grid = grid_search(ops, y0, samples, budget, {0.3, 0.1},
                                     {0.5, 2.0}, cost, cons);
  REQUIRE(grid.status == lp::SolveStatus::optimal);
  CHECK(grid.rho == 0.1);
  CHECK(grid.sigma == 2.0);
  REQUIRE(grid.table.size() == 4);
  CHECK(grid.table[0].rho == 0.1);
  CHECK(grid.table[0].sigma == 0.5);
  CHECK(grid.table[0].status == lp::SolveStatus::infeasible);
  CHECK(grid.table[1].status == lp::SolveStatus::optimal);
  CHECK(grid.table[2].rho == 0.3);
  CHECK(grid.table[2].status == lp::SolveStatus::infeasible);
  CHECK(grid.table[3].status == lp::SolveStatus::optimal);
  CHECK(grid.table[1].objective < grid.table[3].objective);

  SynthesisResult none = grid_search(ops, y0, samples, budget, {0.1, 0.3}, {0.5},
                                     cost, cons);
  CHECK(none.status == lp::SolveStatus::infeasible);
  CHECK(none.table.size() == 2);

  // Parallel grid evaluation returns the same winner as the serial loop.
  SynthesisResult par = grid_search(ops, y0, samples, budget, {0.3, 0.1},
                                    {0.5, 2.0}, cost, cons, 4);
  CHECK(par.rho == grid.rho);
  CHECK(par.sigma == grid.sigma);
  CHECK(par.objective == doctest::Approx(grid.objective).epsilon(1e-12));
}

TEST_CASE("tiny instance matches a brute-force sweep of the bias parameters") {
  // T = 1 scalar plant with rho = 0 and gamma1 > 0: the input gain cap pins
  // Phi_u to zero, the subspace then pins Phi_y to the identity and
  // phi_y = G phi_u, leaving exactly the two entries of phi_u free.
  const InnovationModel md = testutil::scalar_model();
  const StackedOperators ops = stacked_operators(md, 1);
  SampleSet samples;
  samples.e.resize(2, 2);
  samples.e.col(0) << 0.3, -0.2;
  samples.e.col(1) << -0.4, 0.5;
  Eigen::VectorXd y0(2);
  y0 << 0.2, -0.1;
  UncertaintyBudget budget{0.05, 0.02, 0.01, 0.01};
  GainCaps caps{0.0, 2.0};
  CostSpec cost = CostSpec::uniform_weights(1, 1, 1, 1.0, 0.4);
  ConstraintSpec cons = ConstraintSpec::output_floor_input_box(1, 1, 1, -0.8, 0.9);

  SynthesisResult out = solve_drsls(ops, y0, samples, budget, caps, cost, cons);
  REQUIRE(out.status == lp::SolveStatus::optimal);
  CHECK(induced_norm1(out.param.Phi_u) <= 1e-7);

  RadiusCoefficients rc = radius_coefficients(ops, y0, samples, budget, caps);
  const double l_h = lipschitz_of_cost(cost);
  auto objective_at = [&](double p0, double p1) {
    const double eps = rc.c_phi + rc.c_bias * (std::abs(p0) + std::abs(p1));
    Eigen::VectorXd phi_u(2), eta(4);
    phi_u << p0, p1;
    double obj = l_h * eps;
    for (int i = 0; i < 2; ++i) {
      const Eigen::VectorXd v = y0 + ops.Theta * samples.e.col(i);
      eta.head(2) = v + ops.G * phi_u;
      eta.tail(2) = phi_u;
      obj += cost_value(cost, eta) / 2.0;
    }
    for (std::size_t k = 0; k < cons.stages.size(); ++k) {
      double avg = 0.0;
      for (int i = 0; i < 2; ++i) {
        const Eigen::VectorXd v = y0 + ops.Theta * samples.e.col(i);
        eta.head(2) = v + ops.G * phi_u;
        eta.tail(2) = phi_u;
        avg += stage_value(cons.stages[k], eta) / 2.0;
      }
      if (stage_lipschitz(cons.stages[k]) * eps + avg > 0)
        return std::numeric_limits<double>::infinity();
    }
    return obj;
  };

  double best = std::numeric_limits<double>::infinity();
  double b0 = 0.0, b1 = 0.0;
  for (double p0 = -1.2; p0 <= 1.2; p0 += 0.005)
    for (double p1 = -1.2; p1 <= 1.2; p1 += 0.005) {
      const double o = objective_at(p0, p1);
      if (o < best) {
        best = o;
        b0 = p0;
        b1 = p1;
      }
    }
  for (double p0 = b0 - 0.008; p0 <= b0 + 0.008; p0 += 0.0002)
    for (double p1 = b1 - 0.008; p1 <= b1 + 0.008; p1 += 0.0002)
      best = std::min(best, objective_at(p0, p1));

  CHECK(std::abs(out.objective - best) <= 2e-3);
}

TEST_CASE("mean certainty equivalent mode solves the plug-in problem") {
  const InnovationModel md = testutil::scalar_model();
  const int T = 4;
  const StackedOperators ops = stacked_operators(md, T);
  RngStream rng = RngStream::derive(90, RngPurpose::test_fixture, 0);
  SampleSet samples = fixed_samples(rng, T + 1, 6, 0.3);
  const Eigen::VectorXd y0 = rng.uniform_vector(T + 1, -0.3, 0.3);
  CostSpec cost = CostSpec::uniform_weights(T, 1, 1, 1.0, 0.4);
  ConstraintSpec cons = ConstraintSpec::output_floor_input_box(T, 1, 1, -3.0, 2.0);

  SynthesisResult out = build_nominal_sls(
      ops, y0, samples, NominalMode::mean_certainty_equivalent, cost, cons);
  REQUIRE(out.status == lp::SolveStatus::optimal);
  CHECK(out.max_residual <= 1e-7);
  CHECK(validate_structure(out.param));
  CHECK(out.subspace_residual <= 1e-8);

  ClosedLoopResponse at_mean =
      response_from_param(out.param, y0, ops.Theta, samples.mean());
  CHECK(out.objective ==
        doctest::Approx(cost_value(cost, at_mean.eta())).epsilon(1e-6));
  for (const auto& stage : cons.stages)
    CHECK(stage_value(stage, at_mean.eta()) <= 1e-7);
}

TEST_CASE("robust mean response is feasible for the plug-in program") {
  const InnovationModel md = testutil::benchmark_model();
  const int T = 5;
  const StackedOperators ops = stacked_operators(md, T);
  RngStream rng = RngStream::derive(91, RngPurpose::test_fixture, 0);
  SampleSet samples = fixed_samples(rng, T + 1, 8, 0.3);
  const Eigen::VectorXd y0 = rng.uniform_vector(T + 1, -0.3, 0.3);
  CostSpec cost = CostSpec::uniform_weights(T, 1, 1, 1.0, 0.4);
  ConstraintSpec cons = ConstraintSpec::output_floor_input_box(T, 1, 1, -3.0, 2.0);
  UncertaintyBudget budget{0.05, 0.03, 0.02, 0.01};

  SynthesisResult dr = solve_drsls(ops, y0, samples, budget, {0.15, 2.0}, cost, cons);
  SynthesisResult nom = build_nominal_sls(
      ops, y0, samples, NominalMode::mean_certainty_equivalent, cost, cons);
  REQUIRE(dr.status == lp::SolveStatus::optimal);
  REQUIRE(nom.status == lp::SolveStatus::optimal);

  // The averaged tightened constraints make the robust mean response
  // pointwise feasible at the sample mean, so the plug-in optimum can only
  // be cheaper.
  ClosedLoopResponse dr_mean =
      response_from_param(dr.param, y0, ops.Theta, samples.mean());
  for (const auto& stage : cons.stages)
    CHECK(stage_value(stage, dr_mean.eta()) <= 1e-7);
  CHECK(nom.objective <= cost_value(cost, dr_mean.eta()) + 1e-7);
}
