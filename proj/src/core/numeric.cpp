#include "honestrf/core/numeric.hpp"

#include <cmath>
#include <limits>

#include <boost/math/distributions/beta.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "honestrf/core/errors.hpp"

namespace honestrf {

double compensated_mean(std::span<const double> values) {
  if (values.empty()) return 0.0;
  CompensatedSum acc;
  for (double v : values) acc.add(v);
  return acc.value() / static_cast<double>(values.size());
}

Eigen::VectorXd column_means(const Eigen::MatrixXd& rows) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(rows.cols());
  if (rows.rows() == 0) return out;
  for (Eigen::Index c = 0; c < rows.cols(); ++c) {
    CompensatedSum acc;
    for (Eigen::Index r = 0; r < rows.rows(); ++r) acc.add(rows(r, c));
    out(c) = acc.value() / static_cast<double>(rows.rows());
  }
  return out;
}

Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& rows) {
  const Eigen::Index q = rows.cols();
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(q, q);
  const Eigen::Index b = rows.rows();
  if (b < 2) return cov;
  const Eigen::VectorXd mean = column_means(rows);
  for (Eigen::Index i = 0; i < q; ++i) {
    for (Eigen::Index j = i; j < q; ++j) {
      CompensatedSum acc;
      for (Eigen::Index r = 0; r < b; ++r) {
        acc.add((rows(r, i) - mean(i)) * (rows(r, j) - mean(j)));
      }
      cov(i, j) = acc.value() / static_cast<double>(b - 1);
      cov(j, i) = cov(i, j);
    }
  }
  return cov;
}

double normal_critical(double level) {
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("coverage level must lie in (0, 1)");
  const boost::math::normal_distribution<double> z;
  return boost::math::quantile(z, 1.0 - (1.0 - level) / 2.0);
}

double student_t_quantile(double df, double prob) {
  if (!std::isfinite(df) || df <= 0.0) {
    return boost::math::quantile(boost::math::normal_distribution<double>(), prob);
  }
  return boost::math::quantile(boost::math::students_t_distribution<double>(df), prob);
}

std::pair<double, double> clopper_pearson(std::size_t successes, std::size_t trials,
                                          double level) {
  if (trials == 0) return {0.0, 1.0};
  const double a = (1.0 - level) / 2.0;
  const auto k = static_cast<double>(successes);
  const auto n = static_cast<double>(trials);
  double lo = 0.0;
  double hi = 1.0;
  if (successes > 0) {
    lo = boost::math::quantile(boost::math::beta_distribution<double>(k, n - k + 1.0), a);
  }
  if (successes < trials) {
    hi = boost::math::quantile(boost::math::beta_distribution<double>(k + 1.0, n - k),
                               1.0 - a);
  }
  return {lo, hi};
}

double clopper_pearson_upper(std::size_t successes, std::size_t trials, double level) {
  if (trials == 0 || successes >= trials) return 1.0;
  const auto k = static_cast<double>(successes);
  const auto n = static_cast<double>(trials);
  if (successes == 0) return 1.0 - std::pow(1.0 - level, 1.0 / n);
  return boost::math::quantile(boost::math::beta_distribution<double>(k + 1.0, n - k), level);
}

LineFit ols_fit(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ConfigError("ols_fit: x and y differ in length");
  const std::size_t n = x.size();
  if (n < 2) throw InsufficientDataError("ols_fit: need at least two points");
  const double mx = compensated_mean(x);
  const double my = compensated_mean(y);
  CompensatedSum sxx, sxy, syy;
  for (std::size_t i = 0; i < n; ++i) {
    sxx.add((x[i] - mx) * (x[i] - mx));
    sxy.add((x[i] - mx) * (y[i] - my));
    syy.add((y[i] - my) * (y[i] - my));
  }
  if (sxx.value() <= 0.0) throw InsufficientDataError("ols_fit: x values are all equal");
  LineFit fit;
  fit.points = n;
  fit.slope = sxy.value() / sxx.value();
  fit.intercept = my - fit.slope * mx;
  CompensatedSum rss;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - fit.intercept - fit.slope * x[i];
    rss.add(r * r);
  }
  const double residual = std::max(rss.value(), 0.0);
  fit.r_squared = syy.value() > 0.0 ? 1.0 - residual / syy.value() : 1.0;
  fit.slope_se = n > 2 ? std::sqrt(residual / static_cast<double>(n - 2) / sxx.value()) : 0.0;
  return fit;
}

double condition_number(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return std::numeric_limits<double>::infinity();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const auto& sv = svd.singularValues();
  const double smin = sv(sv.size() - 1);
  if (!(smin > 0.0)) return std::numeric_limits<double>::infinity();
  return sv(0) / smin;
}

}  // namespace honestrf
