#include "honestrf/core/tree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "honestrf/core/errors.hpp"
#include "honestrf/core/numeric.hpp"

namespace honestrf {

namespace {

// Per-axis member lists, each sorted by that coordinate (ties by index).
using SortedLists = std::vector<std::vector<std::size_t>>;

SortedLists sort_members(const Dataset& data, std::span<const std::size_t> members) {
  const std::size_t p = data.dim();
  SortedLists lists(p, std::vector<std::size_t>(members.begin(), members.end()));
  for (std::size_t j = 0; j < p; ++j) {
    std::sort(lists[j].begin(), lists[j].end(), [&](std::size_t a, std::size_t b) {
      const double xa = data.x(a, j);
      const double xb = data.x(b, j);
      return xa < xb || (xa == xb && a < b);
    });
  }
  return lists;
}

// Number of entries in `sorted` (ordered by axis) with coordinate < cut.
std::size_t count_below(const Dataset& data, const std::vector<std::size_t>& sorted,
                        std::size_t axis, double cut) {
  const auto it = std::partition_point(sorted.begin(), sorted.end(),
                                       [&](std::size_t i) { return data.x(i, axis) < cut; });
  return static_cast<std::size_t>(it - sorted.begin());
}

// Cut on `axis` closest to the node midpoint among cuts that are admissible on
// the grid and leave at least min_child points on each side. Ties go low.
std::optional<SplitDecision> midpoint_split(const Dataset& data, const SortedLists& lists,
                                            std::span<const std::uint32_t> lo,
                                            std::span<const std::uint32_t> hi,
                                            std::size_t axis, const SplitGrid& grid) {
  const auto& sorted = lists[axis];
  const std::size_t m = sorted.size();
  const std::size_t need = min_child_count(grid.alpha(), m);
  const std::int64_t twice_mid = static_cast<std::int64_t>(lo[axis]) + hi[axis];
  std::optional<SplitDecision> best;
  std::int64_t best_gap = std::numeric_limits<std::int64_t>::max();
  for (std::uint32_t c = lo[axis] + 1; c < hi[axis]; ++c) {
    if (!grid.admissible(lo[axis], hi[axis], c)) continue;
    const double cut = grid.value(c);
    const std::size_t left = count_below(data, sorted, axis, cut);
    if (left < need || m - left < need) continue;
    const std::int64_t gap = std::abs(2 * static_cast<std::int64_t>(c) - twice_mid);
    if (gap < best_gap) {
      best_gap = gap;
      best = SplitDecision{SplitKind::random_cyclic, axis, c, cut};
    }
  }
  return best;
}

std::optional<SplitDecision> best_criterion_split(const Dataset& data, const SortedLists& lists,
                                                  std::span<const std::uint32_t> lo,
                                                  std::span<const std::uint32_t> hi,
                                                  const SplitGrid& grid) {
  const std::size_t p = data.dim();
  const std::size_t m = lists[0].size();
  const std::size_t need = min_child_count(grid.alpha(), m);
  if (m < 2 * need) return std::nullopt;

  // Coordinates are centred on the node centroid before forming prefix sums so
  // that sum-of-squares differences do not cancel catastrophically.
  std::vector<double> centre(p, 0.0);
  for (std::size_t j = 0; j < p; ++j) {
    CompensatedSum acc;
    for (std::size_t i : lists[0]) acc.add(data.x(i, j));
    centre[j] = acc.value() / static_cast<double>(m);
  }

  std::vector<double> prefix_sum((m + 1) * p);
  std::vector<double> prefix_sq(m + 1);
  std::optional<SplitDecision> best;
  double best_obj = std::numeric_limits<double>::infinity();
  double tie_tol = 0.0;

  for (std::size_t axis = 0; axis < p; ++axis) {
    const auto& sorted = lists[axis];
    std::fill(prefix_sum.begin(), prefix_sum.begin() + p, 0.0);
    prefix_sq[0] = 0.0;
    for (std::size_t t = 0; t < m; ++t) {
      double sq = 0.0;
      for (std::size_t j = 0; j < p; ++j) {
        const double d = data.x(sorted[t], j) - centre[j];
        prefix_sum[(t + 1) * p + j] = prefix_sum[t * p + j] + d;
        sq += d * d;
      }
      prefix_sq[t + 1] = prefix_sq[t] + sq;
    }
    const double total_sq = prefix_sq[m];
    tie_tol = 1e-12 * (1.0 + total_sq);

    auto sse = [&](std::size_t from, std::size_t to) {
      const auto count = static_cast<double>(to - from);
      double norm = 0.0;
      for (std::size_t j = 0; j < p; ++j) {
        const double s = prefix_sum[to * p + j] - prefix_sum[from * p + j];
        norm += s * s;
      }
      return (prefix_sq[to] - prefix_sq[from]) - norm / count;
    };

    std::size_t left = 0;
    for (std::uint32_t c = lo[axis] + 1; c < hi[axis]; ++c) {
      if (!grid.admissible(lo[axis], hi[axis], c)) continue;
      const double cut = grid.value(c);
      while (left < m && data.x(sorted[left], axis) < cut) ++left;
      if (left < need || m - left < need) continue;
      const double obj = sse(0, left) + sse(left, m);
      if (obj < best_obj - tie_tol) {
        best_obj = obj;
        best = SplitDecision{SplitKind::criterion, axis, c, cut};
      }
    }
  }
  return best;
}

class Grower {
 public:
  Grower(const Dataset& data, const ForestConfig& cfg, const SplitGrid& grid,
         const CoinSource& coins)
      : data_(data), cfg_(cfg), grid_(grid), coins_(coins) {}

  std::vector<TreeNode> grow(std::span<const std::size_t> subsample) {
    nodes_.clear();
    const std::size_t p = data_.dim();
    std::vector<std::uint32_t> lo(p, 0);
    std::vector<std::uint32_t> hi(p, static_cast<std::uint32_t>(grid_.resolution()));
    build(sort_members(data_, subsample), lo, hi, 0, 0);
    return std::move(nodes_);
  }

 private:
  void make_leaf(std::size_t idx, const std::vector<std::size_t>& members) {
    TerminalStats stats;
    stats.members = members;
    std::sort(stats.members.begin(), stats.members.end());
    CompensatedSum acc;
    for (std::size_t i : stats.members) acc.add(data_.y(i));
    stats.count = stats.members.size();
    stats.mean = acc.value() / static_cast<double>(stats.count);
    nodes_[idx].terminal = std::move(stats);
  }

  std::size_t build(SortedLists lists, const std::vector<std::uint32_t>& lo,
                    const std::vector<std::uint32_t>& hi, std::size_t cyclic, std::size_t depth) {
    const std::size_t idx = nodes_.size();
    nodes_.emplace_back();
    const std::size_t m = lists[0].size();
    {
      TreeNode& node = nodes_[idx];
      node.lo = lo;
      node.hi = hi;
      node.point_count = m;
      node.depth = depth;
      node.cyclic_before = cyclic;
    }
    if (m <= 2 * cfg_.k - 1) {
      make_leaf(idx, lists[0]);
      return idx;
    }

    const bool heads = coins_();
    nodes_[idx].coin = heads;
    std::optional<SplitDecision> decision;
    if (heads) {
      const std::size_t axis = cyclic % data_.dim();
      decision = midpoint_split(data_, lists, lo, hi, axis, grid_);
    }
    if (!decision) decision = best_criterion_split(data_, lists, lo, hi, grid_);
    if (!decision) {
      make_leaf(idx, lists[0]);
      return idx;
    }
    nodes_[idx].split = decision;

    const std::size_t p = data_.dim();
    SortedLists left_lists(p);
    SortedLists right_lists(p);
    for (std::size_t j = 0; j < p; ++j) {
      left_lists[j].reserve(m);
      right_lists[j].reserve(m);
      for (std::size_t i : lists[j]) {
        (data_.x(i, decision->axis) < decision->cut ? left_lists[j] : right_lists[j]).push_back(i);
      }
    }
    lists.clear();

    const std::size_t next_cyclic = cyclic + (decision->kind == SplitKind::random_cyclic ? 1 : 0);
    std::vector<std::uint32_t> left_hi = hi;
    left_hi[decision->axis] = decision->cut_index;
    std::vector<std::uint32_t> right_lo = lo;
    right_lo[decision->axis] = decision->cut_index;

    const std::size_t left = build(std::move(left_lists), lo, left_hi, next_cyclic, depth + 1);
    const std::size_t right = build(std::move(right_lists), right_lo, hi, next_cyclic, depth + 1);
    nodes_[idx].left = left;
    nodes_[idx].right = right;
    return idx;
  }

  const Dataset& data_;
  const ForestConfig& cfg_;
  const SplitGrid& grid_;
  const CoinSource& coins_;
  std::vector<TreeNode> nodes_;
};

void check_subsample(const Dataset& data, std::span<const std::size_t> subsample,
                     const ForestConfig& cfg, const SplitGrid& grid) {
  if (grid.dim() != data.dim()) throw ConfigError("grow_tree: grid dimension differs from data");
  if (cfg.k < 1) throw ConfigError("grow_tree: k must be at least 1");
  if (!(cfg.delta >= 0.0 && cfg.delta <= 1.0)) throw ConfigError("grow_tree: delta must lie in [0, 1]");
  if (subsample.size() < cfg.k) throw ConfigError("grow_tree: subsample smaller than k");
  std::vector<std::size_t> sorted(subsample.begin(), subsample.end());
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw ConfigError("grow_tree: subsample indices must be distinct");
  }
  if (!sorted.empty() && sorted.back() >= data.size()) {
    throw ConfigError("grow_tree: subsample index out of range");
  }
}

}  // namespace

Tree::Tree(std::vector<TreeNode> nodes, std::vector<std::size_t> subsample, std::uint64_t seed,
           std::size_t grid_g)
    : nodes_(std::move(nodes)), subsample_(std::move(subsample)), seed_(seed), grid_g_(grid_g) {}

std::size_t Tree::leaf_id(std::span<const double> x) const noexcept {
  std::size_t idx = 0;
  while (!nodes_[idx].terminal) {
    const auto& split = *nodes_[idx].split;
    idx = x[split.axis] < split.cut ? nodes_[idx].left : nodes_[idx].right;
  }
  return idx;
}

double Tree::lower(const TreeNode& node, std::size_t axis) const noexcept {
  return static_cast<double>(node.lo[axis]) / static_cast<double>(grid_g_);
}

double Tree::upper(const TreeNode& node, std::size_t axis) const noexcept {
  return static_cast<double>(node.hi[axis]) / static_cast<double>(grid_g_);
}

bool Tree::contains(const TreeNode& node, std::span<const double> x) const noexcept {
  for (std::size_t j = 0; j < node.lo.size(); ++j) {
    if (x[j] < lower(node, j)) return false;
    if (node.hi[j] == grid_g_) {
      if (x[j] > 1.0) return false;
    } else if (x[j] >= upper(node, j)) {
      return false;
    }
  }
  return true;
}

std::size_t Tree::leaf_count() const noexcept {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

bool Tree::same_structure(const Tree& other) const noexcept {
  if (nodes_.size() != other.nodes_.size()) return false;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const auto& a = nodes_[i];
    const auto& b = other.nodes_[i];
    if (a.lo != b.lo || a.hi != b.hi || a.split != b.split || a.is_leaf() != b.is_leaf()) {
      return false;
    }
    if (a.split && (a.left != b.left || a.right != b.right)) return false;
    if (a.is_leaf() && a.terminal->members != b.terminal->members) return false;
  }
  return true;
}

Tree grow_tree(const Dataset& data, std::span<const std::size_t> subsample,
               const ForestConfig& cfg, std::uint64_t seed) {
  const SplitGrid grid(data.dim(), cfg.grid_g, cfg.alpha);
  return grow_tree(data, subsample, cfg, grid, seed);
}

Tree grow_tree(const Dataset& data, std::span<const std::size_t> subsample,
               const ForestConfig& cfg, const SplitGrid& grid, std::uint64_t seed) {
  Rng rng(seed);
  std::bernoulli_distribution coin(cfg.delta);
  const CoinSource coins = [&] { return coin(rng); };
  return grow_tree(data, subsample, cfg, grid, coins, seed);
}

Tree grow_tree(const Dataset& data, std::span<const std::size_t> subsample,
               const ForestConfig& cfg, const SplitGrid& grid, const CoinSource& coins,
               std::uint64_t seed_label) {
  check_subsample(data, subsample, cfg, grid);
  Grower grower(data, cfg, grid, coins);
  auto nodes = grower.grow(subsample);
  return Tree(std::move(nodes), std::vector<std::size_t>(subsample.begin(), subsample.end()),
              seed_label, grid.resolution());
}

std::optional<SplitDecision> criterion_split(const Dataset& data,
                                             std::span<const std::size_t> members,
                                             std::span<const std::uint32_t> lo,
                                             std::span<const std::uint32_t> hi,
                                             const SplitGrid& grid) {
  if (members.empty()) return std::nullopt;
  if (lo.size() != data.dim() || hi.size() != data.dim()) {
    throw ConfigError("criterion_split: bounds have the wrong dimension");
  }
  return best_criterion_split(data, sort_members(data, members), lo, hi, grid);
}

std::vector<double> expected_prediction(const Dataset& data,
                                        std::span<const std::size_t> subsample,
                                        const ForestConfig& cfg,
                                        std::span<const Point> queries,
                                        std::size_t max_branches) {
  const SplitGrid grid(data.dim(), cfg.grid_g, cfg.alpha);
  std::vector<double> out(queries.size(), 0.0);
  std::vector<CompensatedSum> acc(queries.size());

  // Depth-first over coin prefixes. A run that asks for more flips than its
  // prefix holds is replayed with both extensions.
  std::vector<std::vector<bool>> pending{{}};
  std::size_t branches = 0;
  while (!pending.empty()) {
    std::vector<bool> script = std::move(pending.back());
    pending.pop_back();
    std::size_t used = 0;
    bool exhausted = false;
    const CoinSource coins = [&] {
      if (used < script.size()) return static_cast<bool>(script[used++]);
      exhausted = true;
      ++used;
      return false;
    };
    Tree tree = grow_tree(data, subsample, cfg, grid, coins);
    if (exhausted) {
      const std::size_t prefix = script.size();
      for (bool outcome : {true, false}) {
        const double w = outcome ? cfg.delta : 1.0 - cfg.delta;
        if (w == 0.0) continue;
        auto next = script;
        next.resize(prefix);
        next.push_back(outcome);
        pending.push_back(std::move(next));
      }
      continue;
    }
    if (++branches > max_branches) throw ConfigError("expected_prediction: too many coin sequences");
    double weight = 1.0;
    for (bool h : script) weight *= h ? cfg.delta : 1.0 - cfg.delta;
    for (std::size_t q = 0; q < queries.size(); ++q) acc[q].add(weight * tree.predict(queries[q]));
  }
  for (std::size_t q = 0; q < queries.size(); ++q) out[q] = acc[q].value();
  return out;
}

}  // namespace honestrf
