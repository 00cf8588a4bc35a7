#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "honestrf/core/dataset.hpp"
#include "honestrf/core/rng.hpp"
#include "honestrf/core/tree.hpp"

namespace testing {

inline honestrf::Dataset uniform_data(std::size_t n, std::size_t p, std::uint64_t seed,
                                      double noise = 0.1) {
  honestrf::UniformSampler sampler(p, noise);
  honestrf::Rng rng(seed);
  return honestrf::draw_dataset(sampler, n, rng);
}

inline std::vector<std::size_t> all_ids(std::size_t n) {
  std::vector<std::size_t> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = i;
  return ids;
}

/// Description of the first regularity violation in the tree, or empty.
inline std::string regularity_violation(const honestrf::Tree& tree, double alpha) {
  for (const auto& node : tree.nodes()) {
    if (!node.split) continue;
    const std::size_t need = honestrf::min_child_count(alpha, node.point_count);
    const auto left = tree.nodes()[node.left].point_count;
    const auto right = tree.nodes()[node.right].point_count;
    if (left < need || right < need || left + right != node.point_count) {
      return "node with " + std::to_string(node.point_count) + " points split into " +
             std::to_string(left) + " + " + std::to_string(right);
    }
  }
  return {};
}

}  // namespace testing
