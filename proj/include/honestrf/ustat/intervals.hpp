#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "honestrf/ustat/forest.hpp"
#include "honestrf/ustat/hajek.hpp"

namespace honestrf {

enum class FunctionalKind { point, contrast, weighted };

/// Linear functional w' f(x_1..x_q) of the forest estimates.
struct FunctionalSpec {
  FunctionalKind kind = FunctionalKind::point;
  Eigen::VectorXd weights;

  static FunctionalSpec point(std::size_t q, std::size_t i);
  /// f(x_i) - f(x_j). With i == j the weights vanish.
  static FunctionalSpec contrast(std::size_t q, std::size_t i, std::size_t j);
  /// Quadrature weights; when `mass` is given the weights must sum to it.
  static FunctionalSpec weighted(std::vector<double> weights, std::optional<double> mass = {});

  void validate(std::size_t q) const;
};

enum class IntervalMode { diagonal, heuristic };

struct IntervalOptions {
  double level = 0.95;
  IntervalMode mode = IntervalMode::diagonal;
  double eps = 0.0;  // exponent in the linear correlation bound of heuristic mode
  /// Adds the finite-B Monte Carlo term cov / B to the variance.
  bool tree_noise = true;
};

struct Interval {
  double center = 0.0;
  double half_width = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double variance = 0.0;
  double level = 0.0;
  IntervalMode mode = IntervalMode::diagonal;

  bool covers(double truth) const noexcept { return lower <= truth && truth <= upper; }
};

/// Linear correlation bound max(1 - s^eps * ||a - b||_1 / p, 0).
double linear_correlation_bound(const Point& a, const Point& b, std::size_t s, double eps);

/// The q x q variance used for the interval. Diagonal mode keeps only the
/// diagonal. Heuristic mode fills each off-diagonal with the worst-case value
/// allowed by the linear correlation bound for the given weights, so the
/// resulting variance of w' est is never smaller than in diagonal mode.
Eigen::MatrixXd interval_covariance(const JointEstimate& est, const HajekEstimate& v,
                                    const Eigen::VectorXd& weights, const IntervalOptions& opts);

Interval confidence_interval(const JointEstimate& est, const HajekEstimate& v,
                             const FunctionalSpec& func, const IntervalOptions& opts = {});

}  // namespace honestrf
