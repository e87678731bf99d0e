#include "drsls/lti_model.hpp"

#include <stdexcept>
#include <string>

#include "drsls/norms.hpp"

namespace drsls {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument("InnovationModel: " + msg);
}

}  // namespace

void InnovationModel::validate() const {
  const auto rn = A.rows();
  require(rn > 0, "A must be non-empty");
  require(A.cols() == rn, "A must be square, got " + std::to_string(rn) + "x" +
                              std::to_string(A.cols()));
  require(B.rows() == rn, "B row count " + std::to_string(B.rows()) +
                              " does not match state dimension " +
                              std::to_string(rn));
  require(B.cols() > 0, "B must have at least one input column");
  require(C.cols() == rn, "C column count " + std::to_string(C.cols()) +
                              " does not match state dimension " +
                              std::to_string(rn));
  require(C.rows() > 0, "C must have at least one output row");
  require(D.rows() == C.rows() && D.cols() == B.cols(),
          "D must be " + std::to_string(C.rows()) + "x" +
              std::to_string(B.cols()) + ", got " + std::to_string(D.rows()) +
              "x" + std::to_string(D.cols()));
  require(L.rows() == rn && L.cols() == C.rows(),
          "L must be " + std::to_string(rn) + "x" + std::to_string(C.rows()) +
              ", got " + std::to_string(L.rows()) + "x" +
              std::to_string(L.cols()));
}

MarkovBank predictor_markov_params(const InnovationModel& model, int tau) {
  model.validate();
  if (tau < 1) throw std::invalid_argument("predictor_markov_params: tau must be >= 1");
  const Eigen::MatrixXd Ap = model.predictor();
  MarkovBank bank;
  bank.tau = tau;
  bank.psi_u.reserve(static_cast<std::size_t>(tau));
  bank.psi_y.reserve(static_cast<std::size_t>(tau));
  Eigen::MatrixXd pu = model.input_predictor();
  Eigen::MatrixXd py = model.L;
  for (int k = 1; k <= tau; ++k) {
    bank.psi_u.push_back(pu);
    bank.psi_y.push_back(py);
    if (k < tau) {
      pu = Ap * pu;
      py = Ap * py;
    }
  }
  return bank;
}

StackedOperators stacked_operators(const InnovationModel& model, int T) {
  model.validate();
  if (T < 0) throw std::invalid_argument("stacked_operators: T must be >= 0");
  const int n = model.n(), m = model.m(), q = model.q();
  const int nb = T + 1;

  StackedOperators ops;
  ops.T = T;
  ops.n = n;
  ops.m = m;
  ops.q = q;

  // Powers of A once, reused by Gamma and both Toeplitz operators.
  std::vector<Eigen::MatrixXd> Apow(static_cast<std::size_t>(nb));
  Apow[0] = Eigen::MatrixXd::Identity(n, n);
  for (int k = 1; k < nb; ++k) Apow[static_cast<std::size_t>(k)] = model.A * Apow[static_cast<std::size_t>(k - 1)];

  ops.Gamma.resize(nb * n, n);
  for (int k = 0; k < nb; ++k) ops.Gamma.middleRows(k * n, n) = Apow[static_cast<std::size_t>(k)];

  ops.Tu = Eigen::MatrixXd::Zero(nb * n, nb * m);
  ops.Te = Eigen::MatrixXd::Zero(nb * n, nb * q);
  for (int i = 1; i < nb; ++i) {
    for (int j = 0; j < i; ++j) {
      const Eigen::MatrixXd& Ak = Apow[static_cast<std::size_t>(i - j - 1)];
      ops.Tu.block(i * n, j * m, n, m) = Ak * model.B;
      ops.Te.block(i * n, j * q, n, q) = Ak * model.L;
    }
  }

  ops.G = Eigen::MatrixXd::Zero(nb * q, nb * m);
  ops.Theta = Eigen::MatrixXd::Identity(nb * q, nb * q);
  for (int i = 0; i < nb; ++i) {
    for (int j = 0; j < i; ++j) {
      ops.G.block(i * q, j * m, q, m) =
          model.C * ops.Tu.block(i * n, j * m, n, m);
      ops.Theta.block(i * q, j * q, q, q) =
          model.C * ops.Te.block(i * n, j * q, n, q);
    }
    ops.G.block(i * q, i * m, q, m) = model.D;
  }
  ops.C = model.C;
  return ops;
}

Eigen::VectorXd window_state_estimate(const MarkovBank& bank,
                                      const PastWindow& window) {
  if (bank.psi_u.empty()) throw std::invalid_argument("window_state_estimate: empty Markov bank");
  const int tau = bank.tau;
  const int n = static_cast<int>(bank.psi_u.front().rows());
  const int m = static_cast<int>(bank.psi_u.front().cols());
  const int q = static_cast<int>(bank.psi_y.front().cols());
  if (window.u_past.size() != static_cast<Eigen::Index>(tau) * m)
    throw std::invalid_argument("window_state_estimate: u_past must have tau*m entries");
  if (window.y_past.size() != static_cast<Eigen::Index>(tau) * q)
    throw std::invalid_argument("window_state_estimate: y_past must have tau*q entries");

  // Oldest entry of the window pairs with the longest lag psi_tau.
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  for (int k = 0; k < tau; ++k) {
    const auto& pu = bank.psi_u[static_cast<std::size_t>(tau - 1 - k)];
    const auto& py = bank.psi_y[static_cast<std::size_t>(tau - 1 - k)];
    x += pu * window.u_past.segment(k * m, m);
    x += py * window.y_past.segment(k * q, q);
  }
  return x;
}

Eigen::VectorXd free_response_offset(const StackedOperators& ops,
                                     const MarkovBank& bank,
                                     const PastWindow& window) {
  const Eigen::VectorXd x0 = window_state_estimate(bank, window);
  if (x0.size() != ops.n)
    throw std::invalid_argument("free_response_offset: Markov bank state dimension does not match operators");
  const int nb = ops.T + 1;
  const Eigen::VectorXd xs = ops.Gamma * x0;  // col(x0, A x0, ..., A^T x0)
  Eigen::VectorXd y0(nb * ops.q);
  for (int k = 0; k < nb; ++k)
    y0.segment(k * ops.q, ops.q) = ops.C * xs.segment(k * ops.n, ops.n);
  return y0;
}

double predictor_decay_check(const InnovationModel& model, int tau) {
  model.validate();
  if (tau < 1) throw std::invalid_argument("predictor_decay_check: tau must be >= 1");
  const Eigen::MatrixXd Ap = model.predictor();
  Eigen::MatrixXd P = Eigen::MatrixXd::Identity(model.n(), model.n());
  for (int k = 0; k < tau; ++k) P = Ap * P;
  return induced_norm1(P);
}

}  // namespace drsls
