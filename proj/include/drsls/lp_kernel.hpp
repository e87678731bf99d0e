#pragma once

#include <Eigen/Core>
#include <cmath>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace drsls::lp {

// Contiguous range of scalar decision variables; matrices are laid out
// row-major inside the range.
struct VarHandle {
  int first = -1;
  int rows = 0;
  int cols = 0;

  bool valid() const { return first >= 0; }
  int size() const { return rows * cols; }
  int elem(int i, int j = 0) const { return first + i * cols + j; }
};

// Sparse affine function of the decision vector: sum coef_k x_{col_k} + c.
// Kept canonical (columns sorted, duplicates merged, exact zeros dropped).
class AffineExpr {
 public:
  AffineExpr() = default;
  AffineExpr(double constant) : constant_(constant) {}  // NOLINT: implicit

  static AffineExpr unit(int col, double coef = 1.0) {
    AffineExpr e;
    if (coef != 0.0) e.terms_.emplace_back(col, coef);
    return e;
  }

  double constant() const { return constant_; }
  const std::vector<std::pair<int, double>>& terms() const { return terms_; }
  bool is_constant() const { return terms_.empty(); }

  AffineExpr& operator+=(const AffineExpr& o);
  AffineExpr& operator-=(const AffineExpr& o);
  AffineExpr& operator*=(double a);
  AffineExpr& add_term(int col, double coef);

  friend AffineExpr operator+(AffineExpr a, const AffineExpr& b) { return a += b; }
  friend AffineExpr operator-(AffineExpr a, const AffineExpr& b) { return a -= b; }
  friend AffineExpr operator*(AffineExpr a, double s) { return a *= s; }
  friend AffineExpr operator*(double s, AffineExpr a) { return a *= s; }
  friend AffineExpr operator-(AffineExpr a) { return a *= -1.0; }

  double eval(const Eigen::VectorXd& x) const;

 private:
  std::vector<std::pair<int, double>> terms_;
  double constant_ = 0.0;
  void canonicalize();
};

// Dense grid of affine expressions; entries default to the constant 0.
class MatrixExpr {
 public:
  MatrixExpr(int rows, int cols)
      : rows_(rows), cols_(cols),
        at_(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols)) {}

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  AffineExpr& operator()(int i, int j) { return at_[idx(i, j)]; }
  const AffineExpr& operator()(int i, int j) const { return at_[idx(i, j)]; }

 private:
  std::size_t idx(int i, int j) const {
    return static_cast<std::size_t>(i) * static_cast<std::size_t>(cols_) +
           static_cast<std::size_t>(j);
  }
  int rows_, cols_;
  std::vector<AffineExpr> at_;
};

enum class SolveStatus { optimal, infeasible, unbounded, numerical_failure };

const char* to_string(SolveStatus s);

struct SolveOptions {
  double feas_tol = 1e-9;     // scaled primal/dual residual target
  double gap_tol = 1e-9;      // relative complementarity gap target
  double accept_tol = 5e-8;   // fallback level accepted on stall
  int max_iter = 100;
  bool verbose = false;
};

struct Solution {
  SolveStatus status = SolveStatus::numerical_failure;
  Eigen::VectorXd x;                // per-column values (empty unless optimal)
  double objective = std::nan("");
  int iterations = 0;
  double gap = std::nan("");
  double max_residual = std::nan("");  // independent constraint re-check
};

// Linear program in the form
//   minimize    obj(x)
//   subject to  eq_k(x) == 0,  ineq_k(x) <= 0
// over free scalar variables. Structural zeros never become variables:
// whatever is not added to the program does not exist in it.
class Program {
 public:
  VarHandle add_scalar(std::string name);
  VarHandle add_vector(std::string name, int n);
  VarHandle add_matrix(std::string name, int rows, int cols);

  AffineExpr x(const VarHandle& h, int i = 0, int j = 0) const;

  void add_eq(AffineExpr e);
  void add_leq(AffineExpr e);  // e <= 0
  void minimize(AffineExpr objective) { obj_ = std::move(objective); }

  int num_cols() const { return cols_; }
  int num_eqs() const { return static_cast<int>(eqs_.size()); }
  int num_ineqs() const { return static_cast<int>(ineqs_.size()); }
  const AffineExpr& objective() const { return obj_; }

  Solution solve(const SolveOptions& opts = {}) const;

  // Worst violation of the original constraint set at x: max over |eq_k(x)|
  // and max(0, ineq_k(x)). Evaluated from the stored expressions, not from
  // anything the solver produced.
  double max_violation(const Eigen::VectorXd& x) const;

  // Plain-text LP interchange format (the usual Minimize / Subject To /
  // Bounds layout); coefficients carry 17 significant digits so a re-parse
  // reproduces them exactly.
  void export_lp(std::ostream& os, const std::string& name = "lp") const;

 private:
  struct VarInfo {
    std::string name;
    VarHandle handle;
  };
  std::vector<VarInfo> vars_;
  int cols_ = 0;
  std::vector<AffineExpr> eqs_, ineqs_;
  AffineExpr obj_;

  std::string col_name(int col) const;
};

// t >= |e| through two linear constraints; returns the handle of t.
VarHandle add_abs_epigraph(Program& prog, const AffineExpr& e,
                           const std::string& name = "abs");

// t >= sum_i |e_i|. Constant entries fold into the sum exactly; identical
// zeros are skipped.
VarHandle add_l1_epigraph(Program& prog, const std::vector<AffineExpr>& es,
                          const std::string& name = "l1");

// t >= max_j sum_i |E(i,j)|, the induced 1-norm of the matrix expression.
VarHandle add_induced1_epigraph(Program& prog, const MatrixExpr& E,
                                const std::string& name = "ind1");

// max_i e_i <= bound, one row per piece.
void add_max_affine_leq(Program& prog, const std::vector<AffineExpr>& es,
                        const AffineExpr& bound);

}  // namespace drsls::lp
