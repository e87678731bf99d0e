#pragma once

#include <Eigen/Core>
#include <vector>

namespace drsls {

// Discrete-time plant in innovation form:
//   x_{t+1} = A x_t + B u_t + L e_t
//   y_t     = C x_t + D u_t + e_t
// where e_t is the innovation process of the stationary predictor with gain
// L. Rewriting the recursion against the prediction x_hat gives the
// predictor dynamics A - L C driven by (B - L D) u + L y, which is what the
// Markov parameter bank below expands.
struct InnovationModel {
  Eigen::MatrixXd A;  // n x n
  Eigen::MatrixXd B;  // n x m
  Eigen::MatrixXd C;  // q x n
  Eigen::MatrixXd D;  // q x m
  Eigen::MatrixXd L;  // n x q

  int n() const { return static_cast<int>(A.rows()); }
  int m() const { return static_cast<int>(B.cols()); }
  int q() const { return static_cast<int>(C.rows()); }

  Eigen::MatrixXd predictor() const { return A - L * C; }
  Eigen::MatrixXd input_predictor() const { return B - L * D; }

  // Throws std::invalid_argument naming the offending field on any
  // dimension mismatch.
  void validate() const;
};

// Predictor Markov parameters:
//   psi_u[k-1] = (A-LC)^{k-1} (B-LD),  psi_y[k-1] = (A-LC)^{k-1} L
// for k = 1..tau, built by iterated multiplication so no eigensolver is
// involved. They reconstruct the state from the last tau inputs/outputs up
// to a (A-LC)^tau truncation error.
struct MarkovBank {
  int tau = 0;
  std::vector<Eigen::MatrixXd> psi_u;  // n x m each
  std::vector<Eigen::MatrixXd> psi_y;  // n x q each
};

// Most recent tau inputs and outputs, oldest first:
//   u_past = col(u_{-tau}, ..., u_{-1}),  y_past likewise.
struct PastWindow {
  Eigen::VectorXd u_past;
  Eigen::VectorXd y_past;
};

// Lifted operators over the horizon t = 0..T (T+1 block rows). The stacked
// signals obey
//   x = Tu u + Te e + Gamma x_0,   y = G u + y0 + Theta e
// with G = Cblk Tu + Dblk, Theta = Cblk Te + I and y0 the free response of
// the estimated initial state.
struct StackedOperators {
  int T = 0;
  int n = 0, m = 0, q = 0;
  Eigen::MatrixXd Gamma;  // (T+1)n x n, rows [I; A; ...; A^T]
  Eigen::MatrixXd Tu;     // (T+1)n x (T+1)m, strictly block lower
  Eigen::MatrixXd Te;     // (T+1)n x (T+1)q, strictly block lower
  Eigen::MatrixXd G;      // (T+1)q x (T+1)m, block lower (strict iff D = 0)
  Eigen::MatrixXd Theta;  // (T+1)q x (T+1)q, unit diagonal blocks
  Eigen::MatrixXd C;      // q x n output map, kept for free-response offsets
};

MarkovBank predictor_markov_params(const InnovationModel& model, int tau);

StackedOperators stacked_operators(const InnovationModel& model, int T);

// Free response y0 = Cblk Gamma Psi [u_past; y_past] where Psi stacks the
// Markov bank oldest-lag first. Exact when the state tau steps ago was
// zero; otherwise off by O(||(A-LC)^tau||).
Eigen::VectorXd free_response_offset(const StackedOperators& ops,
                                     const MarkovBank& bank,
                                     const PastWindow& window);

// State estimate Psi [u_past; y_past] itself (the observer state after
// replaying the window from zero).
Eigen::VectorXd window_state_estimate(const MarkovBank& bank,
                                      const PastWindow& window);

// ||(A-LC)^tau|| in the induced 1-norm: the truncation residual a window of
// length tau leaves in the state reconstruction.
double predictor_decay_check(const InnovationModel& model, int tau);

}  // namespace drsls
