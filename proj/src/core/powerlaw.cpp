#include "honestrf/core/powerlaw.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>

#include "honestrf/core/errors.hpp"
#include "honestrf/core/numeric.hpp"

namespace honestrf {

namespace {

constexpr int kBits = 52;
constexpr double kLowestLogP = -740.0;

struct Profile {
  std::vector<double> u;  // centred log sizes
  std::vector<double> k;
  std::vector<double> rest;

  double cell_loglik(std::size_t i, double t) const {
    t = std::min(t, -1e-15);
    double v = 0.0;
    if (k[i] > 0.0) v += k[i] * t;
    if (rest[i] > 0.0) v += rest[i] * std::log1p(-std::exp(t));
    return v;
  }

  double loglik(double a, double b) const {
    CompensatedSum s;
    for (std::size_t i = 0; i < u.size(); ++i) s.add(cell_loglik(i, a + b * u[i]));
    return s.value();
  }

  // max over the intercept; returns (loglik, argmax)
  std::pair<double, double> profile(double b) const {
    double top = std::numeric_limits<double>::infinity();
    for (double ui : u) top = std::min(top, -b * ui);
    const double hi = top - 1e-12;
    const double lo = std::min(kLowestLogP + top, hi - 1.0);
    const auto res = boost::math::tools::brent_find_minima(
        [&](double a) { return -loglik(a, b); }, lo, hi, kBits);
    return {-res.second, res.first};
  }
};

}  // namespace

PowerLawFit fit_binomial_power_law(std::span<const CountCell> cells, double level,
                                   double slope_limit) {
  if (!(level > 0.5 && level < 1.0)) throw ConfigError("power-law fit: level must lie in (1/2, 1)");
  Profile prof;
  double mean_log = 0.0;
  std::size_t successes = 0;
  PowerLawFit fit;
  for (const auto& c : cells) {
    if (!(c.size > 0.0) || c.trials == 0 || c.successes > c.trials) {
      throw ConfigError("power-law fit: cells need positive size and valid counts");
    }
    mean_log += std::log(c.size);
    successes += c.successes;
    fit.nonzero_cells += c.successes > 0;
  }
  fit.cells = cells.size();
  if (cells.size() < 2) throw InsufficientDataError("power-law fit: need at least two sizes");
  if (successes == 0) throw InsufficientDataError("power-law fit: no successes in any cell");
  mean_log /= static_cast<double>(cells.size());
  for (const auto& c : cells) {
    prof.u.push_back(std::log(c.size) - mean_log);
    prof.k.push_back(static_cast<double>(c.successes));
    prof.rest.push_back(static_cast<double>(c.trials - c.successes));
  }
  if (std::all_of(prof.u.begin(), prof.u.end(), [](double v) { return std::abs(v) < 1e-12; })) {
    throw InsufficientDataError("power-law fit: need at least two distinct sizes");
  }

  auto neg_profile = [&](double b) { return -prof.profile(b).first; };
  const auto best = boost::math::tools::brent_find_minima(neg_profile, -slope_limit, slope_limit, kBits);
  fit.slope = best.first;
  fit.log_likelihood = -best.second;
  // A likelihood that keeps rising towards steeper slopes flattens out long
  // before the limit, so Brent can stop anywhere on the plateau.
  const double at_limit = prof.profile(-slope_limit).first;
  if (at_limit >= fit.log_likelihood - 1e-9 * (1.0 + std::abs(fit.log_likelihood))) {
    fit.slope = -slope_limit;
    fit.log_likelihood = std::max(fit.log_likelihood, at_limit);
    fit.slope_unbounded_below = true;
  }
  fit.intercept = prof.profile(fit.slope).second - fit.slope * mean_log;

  const double z = normal_critical(2.0 * level - 1.0);
  const double drop = 0.5 * z * z;
  auto excess = [&](double b) { return fit.log_likelihood - prof.profile(b).first - drop; };
  boost::math::tools::eps_tolerance<double> tol(40);
  auto solve = [&](double inside, double outside) {
    if (excess(outside) <= 0.0) return outside > inside ? std::numeric_limits<double>::infinity()
                                                        : -std::numeric_limits<double>::infinity();
    std::uintmax_t iters = 200;
    const auto r = boost::math::tools::bisect(excess, std::min(inside, outside),
                                              std::max(inside, outside), tol, iters);
    return 0.5 * (r.first + r.second);
  };
  fit.slope_upper = solve(fit.slope, slope_limit);
  fit.slope_lower = fit.slope_unbounded_below ? -std::numeric_limits<double>::infinity()
                                              : solve(fit.slope, -slope_limit);
  return fit;
}

}  // namespace honestrf
