#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace honestrf {

/// Candidate cut positions fixed before any data is seen: i/g for i = 1..g-1 on
/// every axis. Node bounds are carried as grid indices in [0, g], so a node
/// interval [lo/g, hi/g] admits cut index c only when lo < c < hi and both sides
/// keep at least an alpha fraction of the interval length.
class SplitGrid {
 public:
  SplitGrid(std::size_t p, std::size_t g, double alpha);

  std::size_t dim() const noexcept { return p_; }
  std::size_t resolution() const noexcept { return g_; }
  double alpha() const noexcept { return alpha_; }

  /// The g-1 cut values of an axis (identical on every axis).
  std::span<const double> positions(std::size_t axis) const noexcept;

  /// Real coordinate of grid index c (0 and g give the cube faces).
  double value(std::uint32_t c) const noexcept {
    return static_cast<double>(c) / static_cast<double>(g_);
  }

  bool admissible(std::uint32_t lo, std::uint32_t hi, std::uint32_t c) const noexcept;

  /// Admissible cut indices inside [lo, hi], ascending.
  std::vector<std::uint32_t> admissible_cuts(std::uint32_t lo, std::uint32_t hi) const;

 private:
  std::size_t p_;
  std::size_t g_;
  double alpha_;
  std::vector<double> positions_;
};

/// Builds the uniform grid; throws ConfigError unless g >= 2 and 0 < alpha < 1/2.
SplitGrid build_split_grid(std::size_t p, std::size_t g, double alpha);

}  // namespace honestrf
