#include "honestrf/ustat/trace.hpp"

#include <cmath>

#include "honestrf/core/errors.hpp"
#include "honestrf/core/numeric.hpp"

namespace honestrf {

TraceRatio trace_ratio(const Eigen::MatrixXd& var_t, const Eigen::MatrixXd& var_t_ring,
                       std::size_t s, std::size_t n) {
  if (var_t.rows() != var_t.cols() || var_t_ring.rows() != var_t_ring.cols() ||
      var_t.rows() != var_t_ring.rows() || var_t.rows() == 0) {
    throw ConfigError("trace_ratio: matrices must be square and of equal size");
  }
  if (s == 0 || n == 0) throw ConfigError("trace_ratio: s and n must be positive");
  TraceRatio out;
  out.condition = condition_number(var_t_ring);
  if (!std::isfinite(out.condition) || out.condition > 1e12) {
    throw SingularMatrixError("trace_ratio: projected-kernel covariance is singular",
                              out.condition);
  }
  const Eigen::MatrixXd solved = var_t_ring.partialPivLu().solve(var_t);
  out.value = static_cast<double>(s) / static_cast<double>(n) * solved.trace();
  return out;
}

}  // namespace honestrf
