#include <catch_amalgamated.hpp>

#include <algorithm>
#include <map>
#include <numeric>
#include <set>

#include "honestrf/core/config.hpp"
#include "honestrf/core/errors.hpp"
#include "honestrf/core/split_grid.hpp"
#include "honestrf/core/tree.hpp"
#include "support.hpp"

using namespace honestrf;
using Catch::Matchers::WithinAbs;

namespace {

ForestConfig small_config(std::size_t s, double delta, double alpha, std::size_t k,
                          std::size_t g) {
  ForestConfig cfg;
  cfg.n = s;
  cfg.s = s;
  cfg.trees = 1;
  cfg.delta = delta;
  cfg.alpha = alpha;
  cfg.k = k;
  cfg.grid_g = g;
  return cfg;
}

CoinSource constant_coins(bool value) {
  return [value] { return value; };
}

// Axes of cyclic splits along each root-to-leaf path.
void collect_cyclic_paths(const Tree& tree, std::size_t idx, std::vector<std::size_t>& path,
                          std::vector<std::vector<std::size_t>>& out) {
  const auto& node = tree.nodes()[idx];
  if (node.is_leaf()) {
    out.push_back(path);
    return;
  }
  const bool cyclic = node.split->kind == SplitKind::random_cyclic;
  if (cyclic) path.push_back(node.split->axis);
  collect_cyclic_paths(tree, node.left, path, out);
  collect_cyclic_paths(tree, node.right, path, out);
  if (cyclic) path.pop_back();
}

}  // namespace

TEST_CASE("split grid places g-1 uniform cuts per axis", "[grid]") {
  const SplitGrid grid = build_split_grid(2, 101, 0.01);
  REQUIRE(grid.positions(0).size() == 100);
  REQUIRE(grid.positions(1).size() == 100);
  for (std::size_t i = 0; i < 100; ++i) {
    CHECK(grid.positions(0)[i] == static_cast<double>(i + 1) / 101.0);
  }
  CHECK(std::is_sorted(grid.positions(0).begin(), grid.positions(0).end()));

  const SplitGrid half = build_split_grid(1, 2, 0.25);
  REQUIRE(half.positions(0).size() == 1);
  CHECK(half.positions(0)[0] == 0.5);
}

TEST_CASE("root admissibility keeps an alpha fraction on both sides", "[grid]") {
  const SplitGrid grid = build_split_grid(3, 10, 0.3);
  const std::vector<std::uint32_t> expected{3, 4, 5, 6, 7};
  for (std::size_t axis = 0; axis < 3; ++axis) CHECK(grid.admissible_cuts(0, 10) == expected);
  // Inside [0.2, 0.6] only cuts within 0.3 of the width from either end remain.
  CHECK(grid.admissible_cuts(2, 6) == std::vector<std::uint32_t>{4});
  for (std::uint32_t lo = 0; lo < 10; ++lo) {
    for (std::uint32_t hi = lo + 1; hi <= 10; ++hi) {
      for (std::uint32_t c : grid.admissible_cuts(lo, hi)) {
        const double a = lo / 10.0;
        const double b = hi / 10.0;
        const double t = c / 10.0;
        CHECK(std::min(t - a, b - t) >= 0.3 * (b - a) - 1e-12);
        CHECK(std::min(t - a, b - t) <= 0.7 * (b - a) + 1e-12);
      }
    }
  }
}

TEST_CASE("invalid grid parameters are configuration errors", "[grid]") {
  CHECK_THROWS_AS(build_split_grid(2, 1, 0.1), ConfigError);
  CHECK_THROWS_AS(build_split_grid(2, 10, 0.0), ConfigError);
  CHECK_THROWS_AS(build_split_grid(2, 10, 0.5), ConfigError);
  CHECK_THROWS_AS(build_split_grid(0, 10, 0.1), ConfigError);
}

TEST_CASE("single point subsample gives one terminal node", "[tree]") {
  const Dataset data(2, {0.3, 0.4}, {7.5});
  const auto cfg = small_config(1, 0.5, 0.1, 1, 11);
  const Tree tree = grow_tree(data, testing::all_ids(1), cfg, 42);
  REQUIRE(tree.nodes().size() == 1);
  CHECK(tree.root().is_leaf());
  CHECK(tree.predict(Point{0.9, 0.1}) == 7.5);
}

TEST_CASE("subsample validation", "[tree]") {
  const Dataset data = testing::uniform_data(10, 2, 1);
  auto cfg = small_config(10, 0.5, 0.1, 3, 11);
  const std::vector<std::size_t> two{0, 1};
  CHECK_THROWS_AS(grow_tree(data, two, cfg, 1), ConfigError);
  const std::vector<std::size_t> dup{0, 1, 1, 2};
  CHECK_THROWS_AS(grow_tree(data, dup, cfg, 1), ConfigError);
  const std::vector<std::size_t> out_of_range{0, 1, 10};
  CHECK_THROWS_AS(grow_tree(data, out_of_range, cfg, 1), ConfigError);
}

TEST_CASE("delta = 1 alternates split axes along every path", "[tree]") {
  const Dataset data = testing::uniform_data(200, 2, 7);
  const auto cfg = small_config(200, 1.0, 0.05, 1, 101);
  const Tree tree = grow_tree(data, testing::all_ids(200), cfg, 3);
  std::vector<std::vector<std::size_t>> paths;
  std::vector<std::size_t> scratch;
  collect_cyclic_paths(tree, 0, scratch, paths);
  REQUIRE(paths.size() == tree.leaf_count());
  std::size_t longest = 0;
  for (const auto& path : paths) {
    longest = std::max(longest, path.size());
    for (std::size_t j = 0; j < path.size(); ++j) CHECK(path[j] == j % 2);
  }
  CHECK(longest >= 4);
}

TEST_CASE("cyclic schedule holds given the realized coins", "[tree][property]") {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const std::size_t p = 1 + seed % 4;
    const Dataset data = testing::uniform_data(120, p, seed + 100);
    const auto cfg = small_config(120, 0.5, 0.1, 1 + seed % 3, 31);
    const Tree tree = grow_tree(data, testing::all_ids(120), cfg, seed);
    std::vector<std::vector<std::size_t>> paths;
    std::vector<std::size_t> scratch;
    collect_cyclic_paths(tree, 0, scratch, paths);
    for (const auto& path : paths) {
      for (std::size_t j = 0; j < path.size(); ++j) REQUIRE(path[j] == j % p);
    }
    for (const auto& node : tree.nodes()) {
      if (node.split && node.split->kind == SplitKind::random_cyclic) {
        REQUIRE(node.coin.value_or(false));
        REQUIRE(node.split->axis == node.cyclic_before % p);
      }
    }
  }
}

TEST_CASE("root split of eight points respects ceil(alpha m)", "[tree]") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Dataset data = testing::uniform_data(8, 2, seed);
    const auto cfg = small_config(8, 0.5, 0.3, 1, 101);
    const Tree tree = grow_tree(data, testing::all_ids(8), cfg, seed);
    if (!tree.root().split) continue;
    CHECK(tree.nodes()[tree.root().left].point_count >= 3);
    CHECK(tree.nodes()[tree.root().right].point_count >= 3);
  }
}

TEST_CASE("cyclic cut is the admissible cut nearest the node midpoint", "[tree]") {
  // Points spread so that every cut is point-regular at the root.
  std::vector<double> x;
  std::vector<double> y;
  for (int i = 0; i < 20; ++i) {
    x.push_back((i + 0.5) / 20.0);
    y.push_back(i);
  }
  const Dataset data(1, x, y);
  const auto cfg = small_config(20, 1.0, 0.1, 1, 10);
  const SplitGrid grid(1, 10, 0.1);
  const Tree tree = grow_tree(data, testing::all_ids(20), cfg, grid, constant_coins(true));
  REQUIRE(tree.root().split);
  CHECK(tree.root().split->kind == SplitKind::random_cyclic);
  CHECK(tree.root().split->cut_index == 5);
  // Left child covers [0, 0.5]: grid indices 0..5, midpoint 2.5, tie goes low.
  const auto& left = tree.nodes()[tree.root().left];
  REQUIRE(left.split);
  CHECK(left.split->cut_index == 2);
}

TEST_CASE("criterion split examples", "[criterion]") {
  SECTION("two points: all cuts tie, lowest wins") {
    const Dataset data(1, {0.1, 0.9}, {0.0, 0.0});
    const SplitGrid grid(1, 4, 0.2);
    const std::vector<std::uint32_t> lo{0};
    const std::vector<std::uint32_t> hi{4};
    const auto split = criterion_split(data, testing::all_ids(2), lo, hi, grid);
    REQUIRE(split);
    CHECK(split->axis == 0);
    CHECK(split->cut == 0.25);
  }
  SECTION("repeated point has no regular cut") {
    const Dataset data(1, {0.4, 0.4, 0.4}, {1.0, 2.0, 3.0});
    const SplitGrid grid(1, 10, 0.1);
    const std::vector<std::uint32_t> lo{0};
    const std::vector<std::uint32_t> hi{10};
    CHECK_FALSE(criterion_split(data, testing::all_ids(3), lo, hi, grid));
  }
  SECTION("square corners: both axes tie, axis 0 wins") {
    const Dataset data(2, {0, 0, 0, 1, 1, 0, 1, 1}, {0, 0, 0, 0});
    const SplitGrid grid(2, 2, 0.25);
    const std::vector<std::uint32_t> lo{0, 0};
    const std::vector<std::uint32_t> hi{2, 2};
    const auto split = criterion_split(data, testing::all_ids(4), lo, hi, grid);
    REQUIRE(split);
    CHECK(split->axis == 0);
    CHECK(split->cut == 0.5);
    CHECK(split->kind == SplitKind::criterion);
  }
}

TEST_CASE("criterion split minimizes child SSE by brute force", "[criterion][property]") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const std::size_t p = 1 + seed % 3;
    const std::size_t m = 6 + seed % 20;
    const Dataset data = testing::uniform_data(m, p, seed + 900);
    const SplitGrid grid(p, 17, 0.15);
    const std::vector<std::uint32_t> lo(p, 0);
    const std::vector<std::uint32_t> hi(p, 17);
    const auto ids = testing::all_ids(m);
    const auto got = criterion_split(data, ids, lo, hi, grid);

    // Oracle: direct SSE from scratch for every candidate.
    const std::size_t need = min_child_count(0.15, m);
    double best = std::numeric_limits<double>::infinity();
    std::optional<std::pair<std::size_t, std::uint32_t>> arg;
    for (std::size_t axis = 0; axis < p; ++axis) {
      for (std::uint32_t c : grid.admissible_cuts(0, 17)) {
        std::vector<std::size_t> left;
        std::vector<std::size_t> right;
        for (std::size_t i : ids) (data.x(i, axis) < c / 17.0 ? left : right).push_back(i);
        if (left.size() < need || right.size() < need) continue;
        double obj = 0.0;
        for (const auto* side : {&left, &right}) {
          for (std::size_t j = 0; j < p; ++j) {
            double mean = 0.0;
            for (std::size_t i : *side) mean += data.x(i, j);
            mean /= static_cast<double>(side->size());
            for (std::size_t i : *side) obj += (data.x(i, j) - mean) * (data.x(i, j) - mean);
          }
        }
        if (!arg || obj < best - 1e-12 * (1 + best)) {
          best = obj;
          arg = {axis, c};
        }
      }
    }
    REQUIRE(got.has_value() == arg.has_value());
    if (arg) {
      CHECK(got->axis == arg->first);
      CHECK(got->cut_index == arg->second);
    }
  }
}

TEST_CASE("prediction averages leaf responses and routes boundaries right", "[predict]") {
  SECTION("single leaf") {
    const Dataset data(1, {0.2, 0.7}, {1.0, 3.0});
    const auto cfg = small_config(2, 0.5, 0.1, 2, 10);
    const Tree tree = grow_tree(data, testing::all_ids(2), cfg, 0);
    REQUIRE(tree.leaf_count() == 1);
    CHECK(tree.predict(Point{0.5}) == 2.0);
    CHECK(leaf_id(tree, Point{0.0}) == leaf_id(tree, Point{1.0}));
  }
  SECTION("depth one") {
    const Dataset data(2, {0.2, 0.3, 0.8, 0.3}, {0.2, 0.8});
    const auto cfg = small_config(2, 1.0, 0.1, 1, 2);
    const Tree tree = grow_tree(data, testing::all_ids(2), cfg, 0);
    REQUIRE(tree.root().split);
    CHECK(tree.root().split->axis == 0);
    CHECK(tree.root().split->cut == 0.5);
    CHECK(predict(tree, Point{0.49, 0.3}) == 0.2);
    CHECK(predict(tree, Point{0.5, 0.3}) == 0.8);
    CHECK(leaf_id(tree, Point{0.1, 0.5}) != leaf_id(tree, Point{0.9, 0.5}));
    CHECK(leaf_id(tree, Point{0.1, 0.5}) == leaf_id(tree, Point{0.1, 0.5}));
  }
}

TEST_CASE("regularity and honesty over random configurations", "[tree][property]") {
  Rng meta(2024);
  std::uniform_real_distribution<double> alpha_dist(0.01, 0.49);
  const std::size_t ks[] = {1, 2, 5};
  for (int t = 0; t < 60; ++t) {
    const std::size_t p = 1 + meta() % 3;
    const std::size_t s = 10 + meta() % 200;
    const Dataset data = testing::uniform_data(s, p, meta());
    auto cfg = small_config(s, uniform01(meta), alpha_dist(meta), ks[meta() % 3], 5 + meta() % 60);
    const std::uint64_t seed = meta();
    const Tree tree = grow_tree(data, testing::all_ids(s), cfg, seed);
    INFO("trial " << t);
    REQUIRE(testing::regularity_violation(tree, cfg.alpha).empty());

    std::vector<double> shifted(data.ys().begin(), data.ys().end());
    for (auto& v : shifted) v += 12.5;
    REQUIRE(tree.same_structure(grow_tree(data.with_responses(shifted), testing::all_ids(s), cfg, seed)));
    Rng noise(seed ^ 0x55);
    std::normal_distribution<double> z;
    std::vector<double> fresh(data.size());
    for (auto& v : fresh) v = z(noise);
    REQUIRE(tree.same_structure(grow_tree(data.with_responses(fresh), testing::all_ids(s), cfg, seed)));
  }
}

TEST_CASE("leaves tile the cube", "[tree][property]") {
  const Dataset data = testing::uniform_data(300, 2, 5);
  const auto cfg = small_config(300, 0.5, 0.05, 1, 101);
  const Tree tree = grow_tree(data, testing::all_ids(300), cfg, 9);
  std::vector<std::size_t> leaves;
  for (std::size_t i = 0; i < tree.nodes().size(); ++i) {
    if (tree.nodes()[i].is_leaf()) leaves.push_back(i);
  }
  Rng rng(11);
  for (int t = 0; t < 10000; ++t) {
    Point x{uniform01(rng), uniform01(rng)};
    // Include exact grid values and the far faces.
    if (t % 5 == 0) x[0] = static_cast<double>(rng() % 102) / 101.0;
    if (t % 7 == 0) x[1] = 1.0;
    x[0] = std::min(x[0], 1.0);
    std::size_t hits = 0;
    std::size_t which = 0;
    for (std::size_t id : leaves) {
      if (tree.contains(tree.nodes()[id], x)) {
        ++hits;
        which = id;
      }
    }
    REQUIRE(hits == 1);
    REQUIRE(which == tree.leaf_id(x));
  }
}

TEST_CASE("terminal sizes", "[tree][property]") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const std::size_t k = 1 + seed % 5;
    const Dataset data = testing::uniform_data(150, 2, seed + 77);
    const auto cfg = small_config(150, 0.5, 0.1, k, 21);
    const SplitGrid grid(2, 21, 0.1);
    const Tree tree = grow_tree(data, testing::all_ids(150), cfg, grid, seed);
    for (const auto& node : tree.nodes()) {
      if (!node.is_leaf()) continue;
      REQUIRE(node.terminal->count >= 1);
      REQUIRE(node.terminal->count == node.point_count);
      if (node.point_count > 2 * k - 1) {
        // Only allowed when nothing admissible and regular was left.
        REQUIRE_FALSE(criterion_split(data, node.terminal->members, node.lo, node.hi, grid));
      }
    }
  }
}

TEST_CASE("growth is a pure function of covariates, subsample, config and seed", "[tree]") {
  const Dataset data = testing::uniform_data(400, 3, 8);
  ForestConfig cfg = small_config(400, 0.5, 0.05, 2, 51);
  std::vector<std::size_t> ids;
  for (std::size_t i = 0; i < 400; i += 3) ids.push_back(i);
  const Tree a = grow_tree(data, ids, cfg, 123);
  const Tree b = grow_tree(data, ids, cfg, 123);
  CHECK(a.same_structure(b));
  const Tree c = grow_tree(data, ids, cfg, 124);
  CHECK_FALSE(a.same_structure(c));

  // Rows outside the subsample never matter.
  std::vector<double> x(data.xs().begin(), data.xs().end());
  for (std::size_t i = 1; i < 400; i += 3) x[i * 3] = 0.123;
  const Dataset other(3, x, std::vector<double>(data.ys().begin(), data.ys().end()));
  CHECK(a.same_structure(grow_tree(other, ids, cfg, 123)));
}

TEST_CASE("expected prediction integrates the coin exactly", "[tree]") {
  const Dataset data = testing::uniform_data(5, 2, 31);
  const std::vector<Point> queries{{0.2, 0.2}, {0.8, 0.6}, {0.5, 0.9}};
  const auto ids = testing::all_ids(5);
  for (double delta : {0.0, 1.0}) {
    const auto cfg = small_config(5, delta, 0.2, 1, 8);
    const auto exact = expected_prediction(data, ids, cfg, queries);
    const Tree tree = grow_tree(data, ids, cfg, 1);
    for (std::size_t q = 0; q < queries.size(); ++q) CHECK(exact[q] == tree.predict(queries[q]));
  }
  const auto cfg = small_config(5, 0.3, 0.2, 1, 8);
  const auto exact = expected_prediction(data, ids, cfg, queries);
  std::vector<double> mc(queries.size(), 0.0);
  const int reps = 40000;
  for (int r = 0; r < reps; ++r) {
    const Tree tree = grow_tree(data, ids, cfg, 1000 + r);
    for (std::size_t q = 0; q < queries.size(); ++q) mc[q] += tree.predict(queries[q]) / reps;
  }
  for (std::size_t q = 0; q < queries.size(); ++q) CHECK_THAT(mc[q], WithinAbs(exact[q], 0.01));
}
