#pragma once

#include <cstddef>
#include <span>

namespace honestrf {

/// Binomial count observed at one size: successes out of trials.
struct CountCell {
  double size = 0.0;
  std::size_t successes = 0;
  std::size_t trials = 0;
};

/// Maximum-likelihood fit of p(size) = exp(intercept) * size^slope to binomial
/// counts. Cells with zero successes contribute through their likelihood
/// instead of being dropped. Bounds are profile-likelihood bounds on the slope.
struct PowerLawFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_lower = 0.0;  // one-sided lower bound at the requested level
  double slope_upper = 0.0;  // one-sided upper bound at the requested level
  bool slope_unbounded_below = false;  // the MLE ran into the search limit
  std::size_t cells = 0;
  std::size_t nonzero_cells = 0;
  double log_likelihood = 0.0;
};

/// Needs at least two distinct sizes and at least one success; otherwise
/// throws InsufficientDataError. Slopes are searched in [-slope_limit, slope_limit].
PowerLawFit fit_binomial_power_law(std::span<const CountCell> cells, double level = 0.95,
                                   double slope_limit = 60.0);

}  // namespace honestrf
