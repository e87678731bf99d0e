#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <vector>

#include "lp_internal.hpp"

namespace drsls::lp::detail {

namespace {

// Homogeneous self-dual embedding of the pair
//   min c'x  s.t. Ax = b, Gx + s = h, s >= 0
//   max -b'y - h'z  s.t. A'y + G'z + c = 0, z >= 0
// solved with a Mehrotra predictor-corrector. The embedding keeps a scalar
// pair (tau, kappa); tau -> positive gives the optimum x/tau, kappa -> positive
// gives an infeasibility or unboundedness certificate.
//
// Each Newton step reduces to the quasidefinite system
//   [ dI   A'   G'  ] [dx]   [r1]
//   [ A   -dI   0   ] [dy] = [r2]
//   [ G    0  -W-dI ] [dz]   [r3],   W = diag(s ./ z),
// factored once per iteration with a simplicial LDLT; the static shift d
// keeps the factorization stable and is compensated by refinement against
// the unshifted matrix.

constexpr double kReg = 1e-8;

struct Kkt {
  int n, p, mq;
  Eigen::SparseMatrix<double> K;           // lower triangle
  std::vector<Eigen::Index> zdiag;         // value slots of the W diagonal
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Lower> ldlt;
  const Eigen::SparseMatrix<double>*A, *G;
  Eigen::SparseMatrix<double> AT, GT;
  Eigen::VectorXd w;                       // current scaling, no shift
  bool analyzed = false;

  void init(const ConeLP& lp) {
    n = static_cast<int>(lp.c.size());
    p = static_cast<int>(lp.b.size());
    mq = static_cast<int>(lp.h.size());
    A = &lp.A;
    G = &lp.G;
    AT = lp.A.transpose();
    GT = lp.G.transpose();

    std::vector<Eigen::Triplet<double>> tl;
    tl.reserve(static_cast<std::size_t>(lp.A.nonZeros() + lp.G.nonZeros() + n + p + mq));
    for (int i = 0; i < n; ++i) tl.emplace_back(i, i, kReg);
    for (int k = 0; k < lp.A.outerSize(); ++k)
      for (Eigen::SparseMatrix<double>::InnerIterator it(lp.A, k); it; ++it)
        tl.emplace_back(n + static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
    for (int r = 0; r < p; ++r) tl.emplace_back(n + r, n + r, -kReg);
    for (int k = 0; k < lp.G.outerSize(); ++k)
      for (Eigen::SparseMatrix<double>::InnerIterator it(lp.G, k); it; ++it)
        tl.emplace_back(n + p + static_cast<int>(it.row()), static_cast<int>(it.col()),
                        it.value());
    for (int r = 0; r < mq; ++r) tl.emplace_back(n + p + r, n + p + r, -(1.0 + kReg));

    K.resize(n + p + mq, n + p + mq);
    K.setFromTriplets(tl.begin(), tl.end());
    K.makeCompressed();

    zdiag.assign(mq, -1);
    for (int r = 0; r < mq; ++r) {
      int col = n + p + r;
      for (Eigen::Index idx = K.outerIndexPtr()[col]; idx < K.outerIndexPtr()[col + 1]; ++idx)
        if (K.innerIndexPtr()[idx] == col) zdiag[static_cast<std::size_t>(r)] = idx;
    }
    w = Eigen::VectorXd::Ones(mq);
  }

  bool factorize(const Eigen::VectorXd& w_new) {
    w = w_new;
    double* vals = K.valuePtr();
    for (int r = 0; r < mq; ++r) vals[zdiag[static_cast<std::size_t>(r)]] = -(w[r] + kReg);
    if (!analyzed) {
      ldlt.analyzePattern(K);
      analyzed = true;
    }
    ldlt.factorize(K);
    return ldlt.info() == Eigen::Success;
  }

  // Unshifted operator, used by the refinement loop.
  Eigen::VectorXd apply(const Eigen::VectorXd& v) const {
    Eigen::VectorXd out(n + p + mq);
    out.segment(0, n) = AT * v.segment(n, p) + GT * v.segment(n + p, mq);
    out.segment(n, p) = (*A) * v.segment(0, n);
    out.segment(n + p, mq) =
        (*G) * v.segment(0, n) - w.cwiseProduct(v.segment(n + p, mq));
    return out;
  }

  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const {
    Eigen::VectorXd sol = ldlt.solve(rhs);
    double rhs_scale = 1.0 + rhs.lpNorm<Eigen::Infinity>();
    Eigen::VectorXd best = sol;
    double best_res = (rhs - apply(sol)).lpNorm<Eigen::Infinity>();
    for (int it = 0; it < 3; ++it) {
      if (best_res <= 1e-13 * rhs_scale) break;
      Eigen::VectorXd r = rhs - apply(sol);
      sol += ldlt.solve(r);
      double res = (rhs - apply(sol)).lpNorm<Eigen::Infinity>();
      if (res < best_res) {
        best_res = res;
        best = sol;
      } else {
        break;
      }
    }
    return best;
  }
};

double max_step(const Eigen::VectorXd& v, const Eigen::VectorXd& dv) {
  double a = 1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (dv[i] < 0.0) a = std::min(a, -v[i] / dv[i]);
  return a;
}

double max_step_scalar(double v, double dv) {
  return dv < 0.0 ? std::min(1.0, -v / dv) : 1.0;
}

struct Point {
  Eigen::VectorXd x, y, z, s;
  double tau = 1.0, kappa = 1.0;
};

}  // namespace

IpmResult solve_conelp(const ConeLP& lp, const SolveOptions& opts) {
  IpmResult res;
  const int n = static_cast<int>(lp.c.size());
  const int p = static_cast<int>(lp.b.size());
  const int mq = static_cast<int>(lp.h.size());

  Kkt kkt;
  kkt.init(lp);
  if (!kkt.factorize(Eigen::VectorXd::Ones(mq))) return res;

  const double resx0 = std::max(1.0, lp.c.norm());
  const double resy0 = std::max(1.0, lp.b.norm());
  const double resz0 = std::max(1.0, lp.h.norm());
  double coef_scale = 1.0;
  for (int k = 0; k < lp.A.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(lp.A, k); it; ++it)
      coef_scale = std::max(coef_scale, std::abs(it.value()));
  for (int k = 0; k < lp.G.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(lp.G, k); it; ++it)
      coef_scale = std::max(coef_scale, std::abs(it.value()));

  Point pt;
  {
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + p + mq);
    rhs.segment(n, p) = lp.b;
    rhs.segment(n + p, mq) = lp.h;
    Eigen::VectorXd sol = kkt.solve(rhs);
    pt.x = sol.segment(0, n);
    Eigen::VectorXd s_cand = -sol.segment(n + p, mq);
    double mn = mq > 0 ? s_cand.minCoeff() : 1.0;
    pt.s = (mn > 0.0) ? s_cand : (s_cand.array() + (1.0 - mn)).matrix();

    rhs.setZero();
    rhs.segment(0, n) = -lp.c;
    sol = kkt.solve(rhs);
    pt.y = sol.segment(n, p);
    Eigen::VectorXd z_cand = sol.segment(n + p, mq);
    mn = mq > 0 ? z_cand.minCoeff() : 1.0;
    pt.z = (mn > 0.0) ? z_cand : (z_cand.array() + (1.0 - mn)).matrix();
  }

  struct Best {
    double score = std::numeric_limits<double>::infinity();
    Eigen::VectorXd x, y, z, s;
    double gap = std::nan(""), pres = std::nan(""), dres = std::nan("");
    int iter = 0;
  } best;

  const double cert_tol = opts.feas_tol * 10.0 * coef_scale;

  for (int iter = 0; iter < opts.max_iter; ++iter) {
    Eigen::VectorXd hresx = kkt.AT * pt.y + kkt.GT * pt.z + lp.c * pt.tau;
    Eigen::VectorXd hresy = lp.A * pt.x - lp.b * pt.tau;
    Eigen::VectorXd hresz = lp.G * pt.x + pt.s - lp.h * pt.tau;
    double hrest = pt.kappa + lp.c.dot(pt.x) + lp.b.dot(pt.y) + lp.h.dot(pt.z);
    double gap = pt.s.dot(pt.z) + pt.tau * pt.kappa;
    double mu = gap / (mq + 1);

    double pcost = lp.c.dot(pt.x) / pt.tau;
    double dcost = -(lp.b.dot(pt.y) + lp.h.dot(pt.z)) / pt.tau;
    double pres = std::max(hresy.norm() / resy0, hresz.norm() / resz0) / pt.tau;
    double dres = hresx.norm() / resx0 / pt.tau;
    double sgap = pt.s.dot(pt.z) / (pt.tau * pt.tau);
    double relgap = sgap / std::max(1.0, std::min(std::abs(pcost), std::abs(dcost)));

    if (opts.verbose)
      std::fprintf(stderr, "it %3d  pcost % .6e  dcost % .6e  pres %.2e  dres %.2e  gap %.2e\n",
                   iter, pcost, dcost, pres, dres, relgap);

    double score = std::max({pres, dres, relgap});
    if (score < best.score) {
      best.score = score;
      best.x = pt.x / pt.tau;
      best.y = pt.y / pt.tau;
      best.z = pt.z / pt.tau;
      best.s = pt.s / pt.tau;
      best.gap = sgap;
      best.pres = pres;
      best.dres = dres;
      best.iter = iter;
    }

    if (pres <= opts.feas_tol && dres <= opts.feas_tol && relgap <= opts.gap_tol) {
      res.status = SolveStatus::optimal;
      res.x = pt.x / pt.tau;
      res.y = pt.y / pt.tau;
      res.z = pt.z / pt.tau;
      res.s = pt.s / pt.tau;
      res.iterations = iter;
      res.gap = sgap;
      res.pres = pres;
      res.dres = dres;
      return res;
    }

    // Certificates. A dual point with b'y + h'z < 0 and A'y + G'z ~ 0 proves
    // primal infeasibility; a primal point with c'x < 0, Ax ~ 0, Gx <~ 0
    // proves unboundedness.
    double cert_p = lp.b.dot(pt.y) + lp.h.dot(pt.z);
    if (cert_p < -1e-12) {
      Eigen::VectorXd aty = (hresx - lp.c * pt.tau) / (-cert_p);
      if (aty.lpNorm<Eigen::Infinity>() <= cert_tol) {
        res.status = SolveStatus::infeasible;
        res.iterations = iter;
        return res;
      }
    }
    double cert_d = lp.c.dot(pt.x);
    if (cert_d < -1e-12) {
      Eigen::VectorXd ax = (lp.A * pt.x) / (-cert_d);
      Eigen::VectorXd gx = (lp.G * pt.x) / (-cert_d);
      bool a_ok = ax.size() == 0 || ax.lpNorm<Eigen::Infinity>() <= cert_tol;
      if (a_ok && gx.maxCoeff() <= cert_tol) {
        res.status = SolveStatus::unbounded;
        res.iterations = iter;
        return res;
      }
    }

    if (!kkt.factorize(pt.s.cwiseQuotient(pt.z))) break;

    Eigen::VectorXd rhs_v(n + p + mq);
    rhs_v.segment(0, n) = -lp.c;
    rhs_v.segment(n, p) = lp.b;
    rhs_v.segment(n + p, mq) = lp.h;
    Eigen::VectorXd v = kkt.solve(rhs_v);
    double Sv = lp.c.dot(v.segment(0, n)) + lp.b.dot(v.segment(n, p)) +
                lp.h.dot(v.segment(n + p, mq));
    double dt_den = Sv - pt.kappa / pt.tau;
    if (!std::isfinite(dt_den) || std::abs(dt_den) < 1e-300) break;

    auto newton = [&](double gamma, const Eigen::VectorXd& ds_rhs, double dk_rhs, Point& d) {
      Eigen::VectorXd rhs(n + p + mq);
      rhs.segment(0, n) = -(1.0 - gamma) * hresx;
      rhs.segment(n, p) = -(1.0 - gamma) * hresy;
      rhs.segment(n + p, mq) =
          -(1.0 - gamma) * hresz - ds_rhs.cwiseQuotient(pt.z);
      Eigen::VectorXd u = kkt.solve(rhs);
      double Su = lp.c.dot(u.segment(0, n)) + lp.b.dot(u.segment(n, p)) +
                  lp.h.dot(u.segment(n + p, mq));
      double dtau = (-(1.0 - gamma) * hrest - Su - dk_rhs / pt.tau) / dt_den;
      d.x = u.segment(0, n) + dtau * v.segment(0, n);
      d.y = u.segment(n, p) + dtau * v.segment(n, p);
      d.z = u.segment(n + p, mq) + dtau * v.segment(n + p, mq);
      d.s = ds_rhs.cwiseQuotient(pt.z) - kkt.w.cwiseProduct(d.z);
      d.tau = dtau;
      d.kappa = (dk_rhs - pt.kappa * dtau) / pt.tau;
    };

    // Predictor.
    Point da;
    newton(0.0, (-pt.s.array() * pt.z.array()).matrix(), -pt.tau * pt.kappa, da);
    double aa = std::min({max_step(pt.s, da.s), max_step(pt.z, da.z),
                          max_step_scalar(pt.tau, da.tau),
                          max_step_scalar(pt.kappa, da.kappa)});
    double gap_a = (pt.s + aa * da.s).dot(pt.z + aa * da.z) +
                   (pt.tau + aa * da.tau) * (pt.kappa + aa * da.kappa);
    double sigma = std::clamp(std::pow(gap_a / gap, 3.0), 0.0, 1.0);

    // Corrector.
    Point dc;
    Eigen::VectorXd ds_rhs =
        (-pt.s.array() * pt.z.array() + sigma * mu - da.s.array() * da.z.array()).matrix();
    double dk_rhs = -pt.tau * pt.kappa + sigma * mu - da.tau * da.kappa;
    newton(sigma, ds_rhs, dk_rhs, dc);
    double a = 0.99 * std::min({max_step(pt.s, dc.s), max_step(pt.z, dc.z),
                                max_step_scalar(pt.tau, dc.tau),
                                max_step_scalar(pt.kappa, dc.kappa)});
    if (!std::isfinite(a) || a < 1e-10) break;

    pt.x += a * dc.x;
    pt.y += a * dc.y;
    pt.z += a * dc.z;
    pt.s += a * dc.s;
    pt.tau += a * dc.tau;
    pt.kappa += a * dc.kappa;
    res.iterations = iter + 1;

    if (!pt.x.allFinite() || !pt.z.allFinite() || !std::isfinite(pt.tau)) break;
  }

  if (best.score <= opts.accept_tol) {
    res.status = SolveStatus::optimal;
    res.x = best.x;
    res.y = best.y;
    res.z = best.z;
    res.s = best.s;
    res.gap = best.gap;
    res.pres = best.pres;
    res.dres = best.dres;
    return res;
  }
  res.status = SolveStatus::numerical_failure;
  return res;
}

}  // namespace drsls::lp::detail
