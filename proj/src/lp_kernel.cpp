#include "drsls/lp_kernel.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <functional>
#include <ostream>
#include <stdexcept>

#include "lp_internal.hpp"

namespace drsls::lp {

namespace {

// Rows whose expressions contain no variables are decided here instead of
// being handed to the solver.
constexpr double kConstRowTol = 1e-11;

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void AffineExpr::canonicalize() {
  std::sort(terms_.begin(), terms_.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  std::size_t out = 0;
  for (std::size_t i = 0; i < terms_.size();) {
    int col = terms_[i].first;
    double coef = 0.0;
    while (i < terms_.size() && terms_[i].first == col) coef += terms_[i++].second;
    if (coef != 0.0) terms_[out++] = {col, coef};
  }
  terms_.resize(out);
}

AffineExpr& AffineExpr::operator+=(const AffineExpr& o) {
  constant_ += o.constant_;
  if (!o.terms_.empty()) {
    terms_.insert(terms_.end(), o.terms_.begin(), o.terms_.end());
    canonicalize();
  }
  return *this;
}

AffineExpr& AffineExpr::operator-=(const AffineExpr& o) {
  constant_ -= o.constant_;
  if (!o.terms_.empty()) {
    terms_.reserve(terms_.size() + o.terms_.size());
    for (const auto& [col, coef] : o.terms_) terms_.emplace_back(col, -coef);
    canonicalize();
  }
  return *this;
}

AffineExpr& AffineExpr::operator*=(double a) {
  constant_ *= a;
  if (a == 0.0) {
    terms_.clear();
  } else {
    for (auto& t : terms_) t.second *= a;
  }
  return *this;
}

AffineExpr& AffineExpr::add_term(int col, double coef) {
  if (coef != 0.0) {
    terms_.emplace_back(col, coef);
    canonicalize();
  }
  return *this;
}

double AffineExpr::eval(const Eigen::VectorXd& x) const {
  double v = constant_;
  for (const auto& [col, coef] : terms_) v += coef * x[col];
  return v;
}

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::unbounded: return "unbounded";
    case SolveStatus::numerical_failure: return "numerical_failure";
  }
  return "unknown";
}

VarHandle Program::add_scalar(std::string name) { return add_matrix(std::move(name), 1, 1); }

VarHandle Program::add_vector(std::string name, int n) { return add_matrix(std::move(name), n, 1); }

VarHandle Program::add_matrix(std::string name, int rows, int cols) {
  if (rows <= 0 || cols <= 0) throw std::invalid_argument("variable shape must be positive");
  VarHandle h{cols_, rows, cols};
  vars_.push_back({std::move(name), h});
  cols_ += rows * cols;
  return h;
}

AffineExpr Program::x(const VarHandle& h, int i, int j) const {
  if (!h.valid() || i < 0 || i >= h.rows || j < 0 || j >= h.cols)
    throw std::out_of_range("variable element out of range");
  return AffineExpr::unit(h.elem(i, j));
}

void Program::add_eq(AffineExpr e) { eqs_.push_back(std::move(e)); }

void Program::add_leq(AffineExpr e) { ineqs_.push_back(std::move(e)); }

double Program::max_violation(const Eigen::VectorXd& xv) const {
  double worst = 0.0;
  for (const auto& e : eqs_) worst = std::max(worst, std::abs(e.eval(xv)));
  for (const auto& e : ineqs_) worst = std::max(worst, e.eval(xv));
  return worst;
}

Solution Program::solve(const SolveOptions& opts) const {
  Solution sol;

  // Constant rows are decided up front; everything else is lowered.
  std::vector<const AffineExpr*> eq_rows, ineq_rows;
  eq_rows.reserve(eqs_.size());
  ineq_rows.reserve(ineqs_.size());
  for (const auto& e : eqs_) {
    if (e.is_constant()) {
      if (std::abs(e.constant()) > kConstRowTol) {
        sol.status = SolveStatus::infeasible;
        return sol;
      }
    } else {
      eq_rows.push_back(&e);
    }
  }
  for (const auto& e : ineqs_) {
    if (e.is_constant()) {
      if (e.constant() > kConstRowTol) {
        sol.status = SolveStatus::infeasible;
        return sol;
      }
    } else {
      ineq_rows.push_back(&e);
    }
  }

  if (cols_ == 0) {
    sol.status = SolveStatus::optimal;
    sol.x.resize(0);
    sol.objective = obj_.constant();
    sol.gap = 0.0;
    sol.max_residual = 0.0;
    return sol;
  }

  detail::ConeLP lp;
  const int n = cols_;
  const int p = static_cast<int>(eq_rows.size());
  int mq = static_cast<int>(ineq_rows.size());

  std::vector<Eigen::Triplet<double>> ta, tg;
  lp.b.resize(p);
  for (int r = 0; r < p; ++r) {
    for (const auto& [col, coef] : eq_rows[r]->terms()) ta.emplace_back(r, col, coef);
    lp.b[r] = -eq_rows[r]->constant();
  }
  // The backend wants at least one inequality row; a vacuous 0 <= 1 fills in.
  const bool dummy_row = (mq == 0);
  if (dummy_row) mq = 1;
  lp.h.resize(mq);
  for (std::size_t r = 0; r < ineq_rows.size(); ++r) {
    for (const auto& [col, coef] : ineq_rows[r]->terms())
      tg.emplace_back(static_cast<int>(r), col, coef);
    lp.h[static_cast<Eigen::Index>(r)] = -ineq_rows[r]->constant();
  }
  if (dummy_row) lp.h[0] = 1.0;

  lp.A.resize(p, n);
  lp.A.setFromTriplets(ta.begin(), ta.end());
  lp.G.resize(mq, n);
  lp.G.setFromTriplets(tg.begin(), tg.end());
  lp.c = Eigen::VectorXd::Zero(n);
  for (const auto& [col, coef] : obj_.terms()) lp.c[col] = coef;

  detail::IpmResult res = detail::solve_conelp(lp, opts);
  sol.status = res.status;
  sol.iterations = res.iterations;
  sol.gap = res.gap;
  if (res.status == SolveStatus::optimal) {
    sol.x = res.x;
    sol.objective = obj_.eval(res.x);
    sol.max_residual = max_violation(res.x);
  }
  return sol;
}

std::string Program::col_name(int col) const {
  for (const auto& v : vars_) {
    int off = col - v.handle.first;
    if (off < 0 || off >= v.handle.size()) continue;
    std::string base;
    base.reserve(v.name.size());
    for (char c : v.name)
      base.push_back((std::isalnum(static_cast<unsigned char>(c)) || c == '_') ? c : '_');
    if (base.empty() || std::isdigit(static_cast<unsigned char>(base[0]))) base.insert(0, "x");
    if (v.handle.rows == 1 && v.handle.cols == 1) return base;
    if (v.handle.cols == 1) return base + "_" + std::to_string(off);
    return base + "_" + std::to_string(off / v.handle.cols) + "_" +
           std::to_string(off % v.handle.cols);
  }
  return "v" + std::to_string(col);
}

namespace {

void write_linexpr(std::ostream& os, const AffineExpr& e,
                   const std::function<std::string(int)>& name) {
  if (e.terms().empty()) {
    os << "0 " << name(0);
    return;
  }
  bool first = true;
  for (const auto& [col, coef] : e.terms()) {
    double a = coef;
    if (first) {
      if (a < 0) {
        os << "- ";
        a = -a;
      }
      first = false;
    } else {
      os << (a < 0 ? " - " : " + ");
      a = std::abs(a);
    }
    os << fmt17(a) << " " << name(col);
  }
}

}  // namespace

void Program::export_lp(std::ostream& os, const std::string& name) const {
  auto nm = [this](int col) { return col_name(col); };
  os << "\\ " << name << "\n";
  if (obj_.constant() != 0.0)
    os << "\\ objective constant (add to reported optimum): " << fmt17(obj_.constant()) << "\n";
  os << "Minimize\n obj: ";
  write_linexpr(os, obj_, nm);
  os << "\nSubject To\n";
  int idx = 0;
  for (const auto& e : eqs_) {
    os << " e" << idx++ << ": ";
    write_linexpr(os, e, nm);
    os << " = " << fmt17(-e.constant()) << "\n";
  }
  idx = 0;
  for (const auto& e : ineqs_) {
    os << " i" << idx++ << ": ";
    write_linexpr(os, e, nm);
    os << " <= " << fmt17(-e.constant()) << "\n";
  }
  os << "Bounds\n";
  for (int c = 0; c < cols_; ++c) os << " " << nm(c) << " free\n";
  os << "End\n";
}

VarHandle add_abs_epigraph(Program& prog, const AffineExpr& e, const std::string& name) {
  VarHandle t = prog.add_scalar(name);
  prog.add_leq(e - prog.x(t));
  prog.add_leq(-e - prog.x(t));
  return t;
}

VarHandle add_l1_epigraph(Program& prog, const std::vector<AffineExpr>& es,
                          const std::string& name) {
  VarHandle t = prog.add_scalar(name);
  AffineExpr total;  // sum of per-entry bounds; constants fold in exactly
  bool any = false;
  for (const auto& e : es) {
    if (e.is_constant()) {
      total += std::abs(e.constant());
      continue;
    }
    VarHandle a = prog.add_scalar(name + "_a");
    prog.add_leq(e - prog.x(a));
    prog.add_leq(-e - prog.x(a));
    total += prog.x(a);
    any = true;
  }
  prog.add_leq(total - prog.x(t));
  if (!any && es.empty()) prog.add_leq(-prog.x(t));  // plain t >= 0
  return t;
}

VarHandle add_induced1_epigraph(Program& prog, const MatrixExpr& E, const std::string& name) {
  VarHandle t = prog.add_scalar(name);
  for (int j = 0; j < E.cols(); ++j) {
    AffineExpr colsum;
    for (int i = 0; i < E.rows(); ++i) {
      const AffineExpr& e = E(i, j);
      if (e.is_constant()) {
        // Exact zeros contribute nothing and get no rows.
        colsum += std::abs(e.constant());
        continue;
      }
      VarHandle a = prog.add_scalar(name + "_a");
      prog.add_leq(e - prog.x(a));
      prog.add_leq(-e - prog.x(a));
      colsum += prog.x(a);
    }
    prog.add_leq(colsum - prog.x(t));
  }
  if (E.cols() == 0) prog.add_leq(-prog.x(t));
  return t;
}

void add_max_affine_leq(Program& prog, const std::vector<AffineExpr>& es,
                        const AffineExpr& bound) {
  for (const auto& e : es) prog.add_leq(e - bound);
}

}  // namespace drsls::lp
