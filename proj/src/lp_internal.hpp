#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "drsls/lp_kernel.hpp"

namespace drsls::lp::detail {

// Conic form consumed by the interior-point backend:
//   minimize    c'x
//   subject to  A x == b,  G x + s == h,  s >= 0,  x free.
struct ConeLP {
  Eigen::SparseMatrix<double> A;  // p x n
  Eigen::SparseMatrix<double> G;  // mq x n, mq >= 1
  Eigen::VectorXd b, h, c;
};

struct IpmResult {
  SolveStatus status = SolveStatus::numerical_failure;
  Eigen::VectorXd x, y, z, s;
  int iterations = 0;
  double gap = std::nan("");
  double pres = std::nan("");
  double dres = std::nan("");
};

IpmResult solve_conelp(const ConeLP& lp, const SolveOptions& opts);

}  // namespace drsls::lp::detail
