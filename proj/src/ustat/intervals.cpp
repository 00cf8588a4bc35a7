#include "honestrf/ustat/intervals.hpp"

#include <cmath>

#include "honestrf/core/errors.hpp"
#include "honestrf/core/numeric.hpp"

namespace honestrf {

FunctionalSpec FunctionalSpec::point(std::size_t q, std::size_t i) {
  if (i >= q) throw ConfigError("point functional: index out of range");
  FunctionalSpec f;
  f.kind = FunctionalKind::point;
  f.weights = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(q));
  f.weights(static_cast<Eigen::Index>(i)) = 1.0;
  return f;
}

FunctionalSpec FunctionalSpec::contrast(std::size_t q, std::size_t i, std::size_t j) {
  if (i >= q || j >= q) throw ConfigError("contrast functional: index out of range");
  FunctionalSpec f;
  f.kind = FunctionalKind::contrast;
  f.weights = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(q));
  f.weights(static_cast<Eigen::Index>(i)) += 1.0;
  f.weights(static_cast<Eigen::Index>(j)) -= 1.0;
  return f;
}

FunctionalSpec FunctionalSpec::weighted(std::vector<double> weights, std::optional<double> mass) {
  FunctionalSpec f;
  f.kind = FunctionalKind::weighted;
  f.weights = Eigen::Map<const Eigen::VectorXd>(weights.data(),
                                                static_cast<Eigen::Index>(weights.size()));
  if (mass) {
    CompensatedSum total;
    for (double w : weights) total.add(w);
    if (std::abs(total.value() - *mass) > 1e-9 * (1.0 + std::abs(*mass))) {
      throw ConfigError("weighted functional: weights do not sum to the quadrature mass");
    }
  }
  f.validate(weights.size());
  return f;
}

void FunctionalSpec::validate(std::size_t q) const {
  if (static_cast<std::size_t>(weights.size()) != q) {
    throw ConfigError("functional: weight count differs from the number of points");
  }
  if (!weights.allFinite()) throw ConfigError("functional: weights must be finite");
}

double linear_correlation_bound(const Point& a, const Point& b, std::size_t s, double eps) {
  double d = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) d += std::abs(a[j] - b[j]);
  const double c = std::pow(static_cast<double>(s), eps) / static_cast<double>(a.size());
  return std::max(1.0 - c * d, 0.0);
}

Eigen::MatrixXd interval_covariance(const JointEstimate& est, const HajekEstimate& v,
                                    const Eigen::VectorXd& weights, const IntervalOptions& opts) {
  const Eigen::Index q = est.estimates.size();
  if (v.v_hat.rows() != q || v.v_hat.cols() != q) {
    throw ConfigError("confidence interval: variance estimate has the wrong size");
  }
  Eigen::MatrixXd full = v.v_hat;
  if (opts.tree_noise && !est.degenerate && est.trees_used > 0) {
    full += est.cov / static_cast<double>(est.trees_used);
  }
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(q, q);
  for (Eigen::Index i = 0; i < q; ++i) out(i, i) = std::max(full(i, i), 0.0);
  if (opts.mode == IntervalMode::diagonal) return out;

  for (Eigen::Index i = 0; i < q; ++i) {
    for (Eigen::Index j = i + 1; j < q; ++j) {
      const double rho = linear_correlation_bound(est.points[static_cast<std::size_t>(i)],
                                                  est.points[static_cast<std::size_t>(j)], v.s,
                                                  opts.eps);
      const double sign = weights(i) * weights(j) < 0.0 ? -1.0 : 1.0;
      const double c = sign * rho * std::sqrt(out(i, i) * out(j, j));
      out(i, j) = c;
      out(j, i) = c;
    }
  }
  return out;
}

Interval confidence_interval(const JointEstimate& est, const HajekEstimate& v,
                             const FunctionalSpec& func, const IntervalOptions& opts) {
  const double z = normal_critical(opts.level);
  func.validate(static_cast<std::size_t>(est.estimates.size()));
  const Eigen::MatrixXd cov = interval_covariance(est, v, func.weights, opts);

  Interval out;
  out.level = opts.level;
  out.mode = opts.mode;
  CompensatedSum center;
  for (Eigen::Index i = 0; i < func.weights.size(); ++i) {
    if (func.weights(i) != 0.0) center.add(func.weights(i) * est.estimates(i));
  }
  out.center = center.value();
  out.variance = std::max(func.weights.dot(cov * func.weights), 0.0);
  out.half_width = z * std::sqrt(out.variance);
  out.lower = out.center - out.half_width;
  out.upper = out.center + out.half_width;
  return out;
}

}  // namespace honestrf
