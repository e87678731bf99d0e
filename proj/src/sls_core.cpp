#include "drsls/sls_core.hpp"

#include <stdexcept>
#include <string>

#include "drsls/norms.hpp"

namespace drsls {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

void check_param_shapes(const SlsParam& p) {
  const int ny = p.ny(), nu = p.nu();
  require(p.T >= 0 && p.m >= 1 && p.q >= 1, "SlsParam: bad dimensions");
  require(p.Phi_y.rows() == ny && p.Phi_y.cols() == ny,
          "SlsParam: Phi_y must be " + std::to_string(ny) + " square");
  require(p.Phi_u.rows() == nu && p.Phi_u.cols() == ny,
          "SlsParam: Phi_u must be " + std::to_string(nu) + "x" +
              std::to_string(ny));
  require(p.phi_y.size() == ny, "SlsParam: phi_y length mismatch");
  require(p.phi_u.size() == nu, "SlsParam: phi_u length mismatch");
}

void check_policy_shapes(const AffinePolicy& pol) {
  const int ny = (pol.T + 1) * pol.q, nu = (pol.T + 1) * pol.m;
  require(pol.T >= 0 && pol.m >= 1 && pol.q >= 1, "AffinePolicy: bad dimensions");
  require(pol.K.rows() == nu && pol.K.cols() == ny,
          "AffinePolicy: K must be " + std::to_string(nu) + "x" +
              std::to_string(ny));
  require(pol.p.size() == nu, "AffinePolicy: p length mismatch");
}

// Largest magnitude found in blocks (i, j) with j > i (row blocks of size
// br, column blocks of size bc), plus optionally the diagonal blocks.
double upper_block_mass(const Eigen::MatrixXd& M, int br, int bc,
                        bool include_diagonal) {
  const int rb = static_cast<int>(M.rows()) / br;
  const int cb = static_cast<int>(M.cols()) / bc;
  double worst = 0.0;
  for (int i = 0; i < rb; ++i)
    for (int j = include_diagonal ? i : i + 1; j < cb; ++j)
      worst = std::max(worst, max_abs(M.block(i * br, j * bc, br, bc)));
  return worst;
}

}  // namespace

SlsParam SlsParam::zero(int T, int m, int q) {
  SlsParam p;
  p.T = T;
  p.m = m;
  p.q = q;
  p.Phi_y = Eigen::MatrixXd::Identity((T + 1) * q, (T + 1) * q);
  p.Phi_u = Eigen::MatrixXd::Zero((T + 1) * m, (T + 1) * q);
  p.phi_y = Eigen::VectorXd::Zero((T + 1) * q);
  p.phi_u = Eigen::VectorXd::Zero((T + 1) * m);
  return p;
}

Eigen::MatrixXd SlsParam::stacked() const {
  Eigen::MatrixXd S(Phi_y.rows() + Phi_u.rows(), Phi_y.cols());
  S << Phi_y, Phi_u;
  return S;
}

Eigen::VectorXd SlsParam::stacked_bias() const {
  Eigen::VectorXd b(phi_y.size() + phi_u.size());
  b << phi_y, phi_u;
  return b;
}

Eigen::MatrixXd solve_unit_block_lower(const Eigen::MatrixXd& M,
                                       const Eigen::MatrixXd& B, int bs) {
  require(M.rows() == M.cols() && M.rows() % bs == 0,
          "solve_unit_block_lower: M must be square with block-aligned size");
  require(B.rows() == M.rows(), "solve_unit_block_lower: rhs row mismatch");
  const int nb = static_cast<int>(M.rows()) / bs;
  Eigen::MatrixXd X = B;
  for (int i = 1; i < nb; ++i)
    for (int j = 0; j < i; ++j)
      X.middleRows(i * bs, bs).noalias() -=
          M.block(i * bs, j * bs, bs, bs) * X.middleRows(j * bs, bs);
  return X;
}

Eigen::MatrixXd solve_right_unit_block_lower(const Eigen::MatrixXd& B,
                                             const Eigen::MatrixXd& M, int bs) {
  require(M.rows() == M.cols() && M.rows() % bs == 0,
          "solve_right_unit_block_lower: M must be square with block-aligned size");
  require(B.cols() == M.rows(), "solve_right_unit_block_lower: rhs column mismatch");
  const int nb = static_cast<int>(M.rows()) / bs;
  Eigen::MatrixXd X = B;
  for (int j = nb - 2; j >= 0; --j)
    for (int k = j + 1; k < nb; ++k)
      X.middleCols(j * bs, bs).noalias() -=
          X.middleCols(k * bs, bs) * M.block(k * bs, j * bs, bs, bs);
  return X;
}

Eigen::MatrixXd neumann_inverse(const Eigen::MatrixXd& N, int terms) {
  require(N.rows() == N.cols(), "neumann_inverse: N must be square");
  require(terms >= 1, "neumann_inverse: need at least one term");
  Eigen::MatrixXd sum = Eigen::MatrixXd::Identity(N.rows(), N.cols());
  Eigen::MatrixXd power = sum;
  for (int k = 1; k < terms; ++k) {
    power = N * power;
    sum += power;
  }
  return sum;
}

bool validate_structure(const SlsParam& p, double tol) {
  check_param_shapes(p);
  const int nb = p.T + 1;
  if (upper_block_mass(p.Phi_y, p.q, p.q, false) > tol) return false;
  if (upper_block_mass(p.Phi_u, p.m, p.q, true) > tol) return false;
  for (int i = 0; i < nb; ++i) {
    const Eigen::MatrixXd diag = p.Phi_y.block(i * p.q, i * p.q, p.q, p.q) -
                                 Eigen::MatrixXd::Identity(p.q, p.q);
    if (max_abs(diag) > tol) return false;
  }
  return true;
}

double validate_subspace(const Eigen::MatrixXd& G, const SlsParam& p) {
  check_param_shapes(p);
  require(G.rows() == p.ny() && G.cols() == p.nu(),
          "validate_subspace: G shape mismatch");
  const Eigen::MatrixXd lin =
      p.Phi_y - G * p.Phi_u -
      Eigen::MatrixXd::Identity(p.ny(), p.ny());
  const Eigen::VectorXd aff = p.phi_y - G * p.phi_u;
  return std::max(max_abs(lin), norm_inf(aff));
}

AffinePolicy extract_policy(const SlsParam& p) {
  check_param_shapes(p);
  require(validate_structure(p, 1e-6), "extract_policy: parameter violates causal structure");
  AffinePolicy pol;
  pol.T = p.T;
  pol.m = p.m;
  pol.q = p.q;
  pol.K = solve_right_unit_block_lower(p.Phi_u, p.Phi_y, p.q);
  pol.p = p.phi_u - pol.K * p.phi_y;
  return pol;
}

SlsParam params_from_policy(const AffinePolicy& pol, const Eigen::MatrixXd& G) {
  check_policy_shapes(pol);
  const int ny = (pol.T + 1) * pol.q, nu = (pol.T + 1) * pol.m;
  require(G.rows() == ny && G.cols() == nu, "params_from_policy: G shape mismatch");
  require(upper_block_mass(G, pol.q, pol.m, false) == 0.0,
          "params_from_policy: G must be block lower triangular");
  require(upper_block_mass(pol.K, pol.m, pol.q, true) == 0.0,
          "params_from_policy: K must be strictly block lower triangular");

  SlsParam p;
  p.T = pol.T;
  p.m = pol.m;
  p.q = pol.q;
  // GK and KG are strictly block lower, so both resolvents have exact unit
  // diagonals and forward substitution applies.
  const Eigen::MatrixXd I_GK =
      Eigen::MatrixXd::Identity(ny, ny) - G * pol.K;
  p.Phi_y = solve_unit_block_lower(I_GK, Eigen::MatrixXd::Identity(ny, ny),
                                   pol.q);
  p.Phi_u = pol.K * p.Phi_y;
  const Eigen::MatrixXd I_KG =
      Eigen::MatrixXd::Identity(nu, nu) - pol.K * G;
  p.phi_u = solve_unit_block_lower(I_KG, pol.p, pol.m);
  p.phi_y = G * p.phi_u;
  return p;
}

ClosedLoopResponse response_from_param(const SlsParam& p,
                                       const Eigen::VectorXd& y0,
                                       const Eigen::MatrixXd& Theta,
                                       const Eigen::VectorXd& e) {
  check_param_shapes(p);
  require(y0.size() == p.ny(), "response_from_param: y0 length mismatch");
  require(Theta.rows() == p.ny() && Theta.cols() == p.ny(),
          "response_from_param: Theta shape mismatch");
  require(e.size() == p.ny(), "response_from_param: e length mismatch");
  const Eigen::VectorXd v = y0 + Theta * e;
  ClosedLoopResponse r;
  r.y = p.Phi_y * v + p.phi_y;
  r.u = p.Phi_u * v + p.phi_u;
  return r;
}

ClosedLoopResponse response_from_policy(const AffinePolicy& pol,
                                        const Eigen::MatrixXd& G,
                                        const Eigen::VectorXd& y0,
                                        const Eigen::MatrixXd& Theta,
                                        const Eigen::VectorXd& e) {
  check_policy_shapes(pol);
  const int ny = (pol.T + 1) * pol.q, nu = (pol.T + 1) * pol.m;
  require(G.rows() == ny && G.cols() == nu, "response_from_policy: G shape mismatch");
  require(y0.size() == ny && e.size() == ny,
          "response_from_policy: y0/e length mismatch");
  require(Theta.rows() == ny && Theta.cols() == ny,
          "response_from_policy: Theta shape mismatch");
  const int m = pol.m, q = pol.q;
  const Eigen::VectorXd v = y0 + Theta * e;
  ClosedLoopResponse r;
  r.y.setZero(ny);
  r.u.setZero(nu);
  for (int t = 0; t <= pol.T; ++t) {
    // u_t from past outputs, then y_t which may see u_t through a direct
    // feedthrough block of G.
    Eigen::VectorXd ut = pol.p.segment(t * m, m);
    for (int k = 0; k < t; ++k)
      ut += pol.K.block(t * m, k * q, m, q) * r.y.segment(k * q, q);
    r.u.segment(t * m, m) = ut;
    Eigen::VectorXd yt = v.segment(t * q, q);
    for (int k = 0; k <= t; ++k)
      yt += G.block(t * q, k * m, q, m) * r.u.segment(k * m, m);
    r.y.segment(t * q, q) = yt;
  }
  return r;
}

TrueResponse true_response_under_mismatch(const SlsParam& nominal,
                                          const MismatchRealization& mm,
                                          const Eigen::VectorXd& y0_hat,
                                          const Eigen::MatrixXd& Theta_hat,
                                          const Eigen::VectorXd& e) {
  check_param_shapes(nominal);
  const int ny = nominal.ny(), nu = nominal.nu();
  require(mm.Delta.rows() == ny && mm.Delta.cols() == nu,
          "true_response_under_mismatch: Delta shape mismatch");
  require(mm.Theta_tilde.rows() == ny && mm.Theta_tilde.cols() == ny,
          "true_response_under_mismatch: Theta_tilde shape mismatch");
  require(mm.y0_tilde.size() == ny,
          "true_response_under_mismatch: y0_tilde length mismatch");
  require(upper_block_mass(mm.Delta, nominal.q, nominal.m, false) == 0.0,
          "true_response_under_mismatch: Delta must be block lower triangular");
  require(upper_block_mass(mm.Theta_tilde, nominal.q, nominal.q, true) == 0.0,
          "true_response_under_mismatch: Theta_tilde must be strictly block lower");

  const Eigen::MatrixXd DPhi = mm.Delta * nominal.Phi_u;
  if (induced_norm1(DPhi) >= 1.0 - 1e-9)
    throw std::runtime_error(
        "true_response_under_mismatch: ||Delta Phi_u|| too close to 1, "
        "response map ill conditioned");

  const int ns = static_cast<int>(DPhi.rows());
  const Eigen::MatrixXd M = Eigen::MatrixXd::Identity(ns, ns) - DPhi;
  const Eigen::MatrixXd R =
      solve_unit_block_lower(M, Eigen::MatrixXd::Identity(ns, ns), nominal.q);
  const Eigen::MatrixXd RDelta = R * mm.Delta;
  const Eigen::VectorXd shift = RDelta * nominal.phi_u;

  TrueResponse out;
  out.param.T = nominal.T;
  out.param.m = nominal.m;
  out.param.q = nominal.q;
  out.param.Phi_y = nominal.Phi_y * R;
  out.param.Phi_u = nominal.Phi_u * R;
  out.param.phi_y = nominal.phi_y + nominal.Phi_y * shift;
  out.param.phi_u = nominal.phi_u + nominal.Phi_u * shift;
  out.response = response_from_param(out.param, y0_hat + mm.y0_tilde,
                                     Theta_hat + mm.Theta_tilde, e);
  return out;
}

double stacked_gain_norm(const SlsParam& p) {
  check_param_shapes(p);
  return induced_norm1(p.stacked());
}

}  // namespace drsls
