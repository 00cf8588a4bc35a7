#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "honestrf/core/config.hpp"
#include "honestrf/core/dataset.hpp"
#include "honestrf/core/split_grid.hpp"

namespace honestrf {

enum class SplitKind { random_cyclic, criterion };

struct SplitDecision {
  SplitKind kind = SplitKind::criterion;
  std::size_t axis = 0;
  std::uint32_t cut_index = 0;  // grid index; the cut sits at cut_index / g
  double cut = 0.0;

  friend bool operator==(const SplitDecision&, const SplitDecision&) = default;
};

struct TerminalStats {
  std::vector<std::size_t> members;  // dataset indices, ascending
  double mean = 0.0;
  std::size_t count = 0;
};

/// A hyperrectangle of the partition. Bounds are grid indices: the node covers
/// [lo[j]/g, hi[j]/g) on axis j, closed on the right when hi[j] == g.
struct TreeNode {
  std::vector<std::uint32_t> lo;
  std::vector<std::uint32_t> hi;
  std::size_t point_count = 0;
  std::size_t depth = 0;
  std::size_t cyclic_before = 0;  // cyclic splits on the path above this node
  std::optional<bool> coin;       // delta-coin outcome, when one was flipped
  std::optional<SplitDecision> split;
  std::size_t left = 0;
  std::size_t right = 0;
  std::optional<TerminalStats> terminal;

  bool is_leaf() const noexcept { return terminal.has_value(); }
};

class Tree {
 public:
  Tree(std::vector<TreeNode> nodes, std::vector<std::size_t> subsample, std::uint64_t seed,
       std::size_t grid_g);

  const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }
  const TreeNode& root() const noexcept { return nodes_.front(); }
  std::span<const std::size_t> subsample_ids() const noexcept { return subsample_; }
  std::uint64_t seed() const noexcept { return seed_; }
  std::size_t grid_resolution() const noexcept { return grid_g_; }

  /// Index into nodes() of the leaf containing x.
  std::size_t leaf_id(std::span<const double> x) const noexcept;
  double predict(std::span<const double> x) const noexcept {
    return nodes_[leaf_id(x)].terminal->mean;
  }

  /// Real bounds of a node on one axis.
  double lower(const TreeNode& node, std::size_t axis) const noexcept;
  double upper(const TreeNode& node, std::size_t axis) const noexcept;
  /// Half-open cell membership with the rightmost cell closed.
  bool contains(const TreeNode& node, std::span<const double> x) const noexcept;

  std::size_t leaf_count() const noexcept;

  /// Same axes, cuts, bounds and node layout. Ignores leaf values.
  bool same_structure(const Tree& other) const noexcept;

 private:
  std::vector<TreeNode> nodes_;
  std::vector<std::size_t> subsample_;
  std::uint64_t seed_;
  std::size_t grid_g_;
};

/// Supplies delta-coin outcomes in the order nodes are visited (preorder).
using CoinSource = std::function<bool()>;

/// Grows an honest, (alpha, k)-regular tree on the subsample. Splits look only
/// at covariates; responses enter through leaf means alone. The coin and every
/// other random choice derive from `seed`.
Tree grow_tree(const Dataset& data, std::span<const std::size_t> subsample,
               const ForestConfig& cfg, std::uint64_t seed);

Tree grow_tree(const Dataset& data, std::span<const std::size_t> subsample,
               const ForestConfig& cfg, const SplitGrid& grid, std::uint64_t seed);

/// Growth with externally scripted coin outcomes.
Tree grow_tree(const Dataset& data, std::span<const std::size_t> subsample,
               const ForestConfig& cfg, const SplitGrid& grid, const CoinSource& coins,
               std::uint64_t seed_label = 0);

/// Admissible (axis, cut) minimizing the summed squared distance of member
/// points to their child centroids. Ties go to the lowest axis, then the lowest
/// cut. std::nullopt when no cut is admissible and regular in points.
std::optional<SplitDecision> criterion_split(const Dataset& data,
                                             std::span<const std::size_t> members,
                                             std::span<const std::uint32_t> lo,
                                             std::span<const std::uint32_t> hi,
                                             const SplitGrid& grid);

inline double predict(const Tree& tree, std::span<const double> x) noexcept {
  return tree.predict(x);
}

inline std::size_t leaf_id(const Tree& tree, std::span<const double> x) noexcept {
  return tree.leaf_id(x);
}

/// E_xi of the tree prediction at each query, computed exactly by enumerating
/// every coin sequence the growth can request. Intended for tiny subsamples;
/// throws ConfigError past `max_branches` sequences.
std::vector<double> expected_prediction(const Dataset& data,
                                        std::span<const std::size_t> subsample,
                                        const ForestConfig& cfg,
                                        std::span<const Point> queries,
                                        std::size_t max_branches = 1u << 16);

}  // namespace honestrf
