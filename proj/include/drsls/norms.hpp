#pragma once

#include <Eigen/Core>

namespace drsls {

// Maximum absolute column sum (the operator norm induced by the vector
// 1-norm). Empty matrices have norm zero.
inline double induced_norm1(const Eigen::Ref<const Eigen::MatrixXd>& M) {
  if (M.size() == 0) return 0.0;
  return M.cwiseAbs().colwise().sum().maxCoeff();
}

inline double norm1(const Eigen::Ref<const Eigen::VectorXd>& v) {
  return v.size() == 0 ? 0.0 : v.lpNorm<1>();
}

inline double norm_inf(const Eigen::Ref<const Eigen::VectorXd>& v) {
  return v.size() == 0 ? 0.0 : v.lpNorm<Eigen::Infinity>();
}

inline double max_abs(const Eigen::Ref<const Eigen::MatrixXd>& M) {
  return M.size() == 0 ? 0.0 : M.cwiseAbs().maxCoeff();
}

}  // namespace drsls
