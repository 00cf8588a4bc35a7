#pragma once

#include <cstddef>
#include <cstdint>

namespace honestrf {

/// Tuning parameters of the subsampled honest forest.
struct ForestConfig {
  std::size_t n = 10000;      // sample size
  std::size_t s = 500;        // subsample size (U-statistic order)
  std::size_t trees = 5000;   // Monte Carlo subsamples B
  double delta = 0.5;         // probability of a cyclic (data-independent axis) split
  double alpha = 0.01;        // regularity fraction, in (0, 1/2)
  std::size_t k = 1;          // terminal size parameter; nodes with <= 2k-1 points stop
  std::size_t grid_g = 101;   // grid cells per axis; cuts at i/g
  std::uint64_t seed = 0;

  /// Throws ConfigError when an invariant is violated.
  void validate() const;
};

/// Smallest child size allowed when splitting a node of m points: ceil(alpha * m).
std::size_t min_child_count(double alpha, std::size_t m) noexcept;

}  // namespace honestrf
