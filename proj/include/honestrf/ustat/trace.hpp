#pragma once

#include <cstddef>

#include <Eigen/Dense>

namespace honestrf {

struct TraceRatio {
  double value = 0.0;
  double condition = 0.0;  // condition number of the projected-kernel covariance
};

/// (s/n) * tr(var_t_ring^{-1} var_t). Throws SingularMatrixError when the
/// condition number of var_t_ring exceeds 1e12; no regularization is applied.
TraceRatio trace_ratio(const Eigen::MatrixXd& var_t, const Eigen::MatrixXd& var_t_ring,
                       std::size_t s, std::size_t n);

}  // namespace honestrf
