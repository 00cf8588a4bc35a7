#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <utility>

#include <Eigen/Dense>

namespace honestrf {

/// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double v) noexcept {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v)) {
      carry_ += (sum_ - t) + v;
    } else {
      carry_ += (v - t) + sum_;
    }
    sum_ = t;
  }
  double value() const noexcept { return sum_ + carry_; }

 private:
  double sum_ = 0.0;
  double carry_ = 0.0;
};

double compensated_mean(std::span<const double> values);

/// Column means of a rows x cols matrix, each a compensated sum.
Eigen::VectorXd column_means(const Eigen::MatrixXd& rows);

/// Unbiased sample covariance of the rows (two-pass, compensated). The result is
/// exactly symmetric. With fewer than two rows the matrix is all zeros.
Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& rows);

/// Two-sided standard normal critical value z with P(|Z| <= z) = level.
double normal_critical(double level);

/// One-sided Student-t quantile P(T <= t) = prob.
double student_t_quantile(double df, double prob);

/// Exact binomial (Clopper-Pearson) two-sided interval at the given level.
std::pair<double, double> clopper_pearson(std::size_t successes, std::size_t trials,
                                          double level);

/// One-sided Clopper-Pearson upper bound at the given level.
double clopper_pearson_upper(std::size_t successes, std::size_t trials, double level);

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;
  double r_squared = 1.0;
  std::size_t points = 0;
};

/// Ordinary least squares y = intercept + slope * x. Needs at least two distinct x.
LineFit ols_fit(std::span<const double> x, std::span<const double> y);

/// Spectral condition number (ratio of extreme singular values).
double condition_number(const Eigen::MatrixXd& m);

}  // namespace honestrf
