#include "honestrf/core/split_grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "honestrf/core/config.hpp"
#include "honestrf/core/errors.hpp"

namespace honestrf {

namespace {
// Grid arithmetic is exact in indices; the tolerance only absorbs rounding in alpha * width.
constexpr double kFractionTolerance = 1e-9;
}  // namespace

void ForestConfig::validate() const {
  if (s < 1) throw ConfigError("config: subsample size s must be at least 1");
  if (s > n) throw ConfigError("config: subsample size s must not exceed n");
  if (trees < 1) throw ConfigError("config: number of trees must be at least 1");
  if (!(delta >= 0.0 && delta <= 1.0)) throw ConfigError("config: delta must lie in [0, 1]");
  if (!(alpha > 0.0 && alpha < 0.5)) throw ConfigError("config: alpha must lie in (0, 1/2)");
  if (k < 1) throw ConfigError("config: k must be at least 1");
  if (grid_g < 2) throw ConfigError("config: grid resolution must be at least 2");
}

std::size_t min_child_count(double alpha, std::size_t m) noexcept {
  const double raw = std::ceil(alpha * static_cast<double>(m) - kFractionTolerance);
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::max(raw, 0.0)));
}

SplitGrid::SplitGrid(std::size_t p, std::size_t g, double alpha) : p_(p), g_(g), alpha_(alpha) {
  if (p_ < 1) throw ConfigError("split grid: dimension must be at least 1");
  if (g_ < 2) throw ConfigError("split grid: resolution g must be at least 2");
  if (!(alpha_ > 0.0 && alpha_ < 0.5)) throw ConfigError("split grid: alpha must lie in (0, 1/2)");
  positions_.reserve(g_ - 1);
  for (std::size_t i = 1; i < g_; ++i) positions_.push_back(value(static_cast<std::uint32_t>(i)));
}

std::span<const double> SplitGrid::positions(std::size_t /*axis*/) const noexcept {
  return positions_;
}

bool SplitGrid::admissible(std::uint32_t lo, std::uint32_t hi, std::uint32_t c) const noexcept {
  if (!(lo < c && c < hi)) return false;
  const double width = static_cast<double>(hi - lo);
  const double shortest = static_cast<double>(std::min(c - lo, hi - c));
  return shortest >= alpha_ * width - kFractionTolerance;
}

std::vector<std::uint32_t> SplitGrid::admissible_cuts(std::uint32_t lo, std::uint32_t hi) const {
  std::vector<std::uint32_t> out;
  for (std::uint32_t c = lo + 1; c < hi; ++c) {
    if (admissible(lo, hi, c)) out.push_back(c);
  }
  return out;
}

SplitGrid build_split_grid(std::size_t p, std::size_t g, double alpha) {
  return SplitGrid(p, g, alpha);
}

}  // namespace honestrf
