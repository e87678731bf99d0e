#pragma once

#include <Eigen/Core>

namespace drsls {

// Closed-loop response parameterization over a horizon t = 0..T. With the
// plant output split as y = G u + v (v collects the free response and the
// innovation contribution), an affine policy u = K y + p induces
//   y = Phi_y v + phi_y,   u = Phi_u v + phi_u
// with Phi_y = (I - G K)^{-1}, Phi_u = K Phi_y, phi_u = (I - K G)^{-1} p and
// phi_y = G phi_u. Conversely any (Phi, phi) satisfying the affine subspace
//   Phi_y - G Phi_u = I,   phi_y - G phi_u = 0
// with the causal block structure below is achieved by exactly one policy.
struct SlsParam {
  int T = 0, m = 0, q = 0;
  Eigen::MatrixXd Phi_y;   // (T+1)q x (T+1)q, block lower, identity diagonal
  Eigen::MatrixXd Phi_u;   // (T+1)m x (T+1)q, strictly block lower
  Eigen::VectorXd phi_y;   // (T+1)q
  Eigen::VectorXd phi_u;   // (T+1)m

  static SlsParam zero(int T, int m, int q);

  int ny() const { return (T + 1) * q; }
  int nu() const { return (T + 1) * m; }

  // col(Phi_y; Phi_u) and col(phi_y; phi_u); the stacked response map.
  Eigen::MatrixXd stacked() const;
  Eigen::VectorXd stacked_bias() const;
};

// u = K y + p with K strictly block lower: u_t sees y_0..y_{t-1} only.
struct AffinePolicy {
  int T = 0, m = 0, q = 0;
  Eigen::MatrixXd K;  // (T+1)m x (T+1)q
  Eigen::VectorXd p;  // (T+1)m
};

struct ClosedLoopResponse {
  Eigen::VectorXd y;
  Eigen::VectorXd u;

  Eigen::VectorXd eta() const {
    Eigen::VectorXd out(y.size() + u.size());
    out << y, u;
    return out;
  }
};

// Additive perturbation of the lifted data: the true plant is
// (G + Delta, Theta + Theta_tilde, y0 + y0_tilde).
struct MismatchRealization {
  Eigen::MatrixXd Delta;        // (T+1)q x (T+1)m, block lower like G
  Eigen::MatrixXd Theta_tilde;  // (T+1)q x (T+1)q, strictly block lower
  Eigen::VectorXd y0_tilde;     // (T+1)q
};

struct TrueResponse {
  SlsParam param;  // the response map realized on the perturbed plant
  ClosedLoopResponse response;
};

// --- block-triangular linear algebra -------------------------------------
// All inverses in this module are of block unit-lower-triangular matrices
// and are evaluated by forward substitution; no general inverse is formed.

// X = M^{-1} B where M has identity diagonal blocks of size bs.
Eigen::MatrixXd solve_unit_block_lower(const Eigen::MatrixXd& M,
                                       const Eigen::MatrixXd& B, int bs);

// X = B M^{-1}, same assumptions on M.
Eigen::MatrixXd solve_right_unit_block_lower(const Eigen::MatrixXd& B,
                                             const Eigen::MatrixXd& M, int bs);

// Truncated Neumann series sum_{k=0}^{terms-1} N^k for (I - N)^{-1}. With N
// strictly block lower over T+1 blocks the series is exact at terms = T+1;
// kept as an independent path for testing the substitution-based inverses.
Eigen::MatrixXd neumann_inverse(const Eigen::MatrixXd& N, int terms);

// --- parameterization ------------------------------------------------------

// Shape and causal-structure check: returns false on any forbidden block
// above tol or a diagonal Phi_y block off identity by more than tol.
bool validate_structure(const SlsParam& param, double tol = 1e-9);

// Max-abs residual of the affine subspace conditions for the given plant.
double validate_subspace(const Eigen::MatrixXd& G, const SlsParam& param);

// Recovers the unique policy realizing a structurally valid parameter:
// K = Phi_u Phi_y^{-1}, p = phi_u - K phi_y.
AffinePolicy extract_policy(const SlsParam& param);

// Response maps induced by (K, p) on the plant G.
SlsParam params_from_policy(const AffinePolicy& policy,
                            const Eigen::MatrixXd& G);

// Evaluates the parameterized response at one disturbance realization:
// v = y0 + Theta e, y = Phi_y v + phi_y, u = Phi_u v + phi_u.
ClosedLoopResponse response_from_param(const SlsParam& param,
                                       const Eigen::VectorXd& y0,
                                       const Eigen::MatrixXd& Theta,
                                       const Eigen::VectorXd& e);

// Causal step-through of u = K y + p against y = G u + y0 + Theta e.
ClosedLoopResponse response_from_policy(const AffinePolicy& policy,
                                        const Eigen::MatrixXd& G,
                                        const Eigen::VectorXd& y0,
                                        const Eigen::MatrixXd& Theta,
                                        const Eigen::VectorXd& e);

// Response of the nominal-synthesized policy on a perturbed plant. The
// policy (K, p) extracted from `nominal` is invariant; the realized maps are
//   R = (I - Delta Phi_u)^{-1}
//   Phi_y' = Phi_y R, Phi_u' = Phi_u R
//   phi_y' = phi_y + Phi_y R Delta phi_u, phi_u' = phi_u + Phi_u R Delta phi_u
// evaluated at (y0 + y0_tilde, Theta + Theta_tilde). Throws when
// ||Delta Phi_u|| >= 1 - 1e-9, where the sensitivity bounds backing the
// robust design lose meaning.
TrueResponse true_response_under_mismatch(const SlsParam& nominal,
                                          const MismatchRealization& mm,
                                          const Eigen::VectorXd& y0_hat,
                                          const Eigen::MatrixXd& Theta_hat,
                                          const Eigen::VectorXd& e);

// Induced 1-norm of the stacked map col(Phi_y; Phi_u): per-column absolute
// sums taken over both blocks.
double stacked_gain_norm(const SlsParam& param);

}  // namespace drsls
