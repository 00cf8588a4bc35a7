#include "honestrf/ustat/forest.hpp"

#include <algorithm>
#include <numeric>
#include <optional>
#include <unordered_set>

#include "honestrf/core/errors.hpp"
#include "honestrf/core/numeric.hpp"
#include "honestrf/core/parallel.hpp"

namespace honestrf {

namespace {

constexpr std::size_t kBatch = 64;

void check_points(std::span<const Point> points, std::size_t p) {
  if (points.empty()) throw ConfigError("at least one query point is required");
  for (const auto& x : points) {
    if (x.size() != p) throw ConfigError("query point has the wrong dimension");
    for (double v : x) {
      if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("query points must lie in [0, 1]^p");
    }
  }
}

}  // namespace

std::vector<std::size_t> draw_subsample(std::size_t n, std::size_t s, Rng& rng) {
  if (s > n) throw ConfigError("draw_subsample: s exceeds n");
  std::vector<std::size_t> out;
  out.reserve(s);
  if (2 * s <= n) {
    // Floyd's algorithm: s draws, uniform over size-s subsets.
    std::unordered_set<std::size_t> chosen;
    chosen.reserve(2 * s);
    for (std::size_t j = n - s; j < n; ++j) {
      std::uniform_int_distribution<std::size_t> pick(0, j);
      const std::size_t t = pick(rng);
      out.push_back(chosen.insert(t).second ? t : j);
      if (out.back() == j) chosen.insert(j);
    }
  } else {
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), 0);
    for (std::size_t i = 0; i < s; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, n - 1);
      std::swap(all[i], all[pick(rng)]);
    }
    out.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(s));
  }
  std::sort(out.begin(), out.end());
  return out;
}

void for_each_tree(const Dataset& data, const ForestConfig& cfg, std::size_t count,
                   std::size_t threads, const std::function<void(std::size_t, const Tree&)>& visit) {
  cfg.validate();
  if (cfg.n != data.size()) throw ConfigError("config n differs from the dataset size");
  const SplitGrid grid(data.dim(), cfg.grid_g, cfg.alpha);
  std::vector<std::optional<Tree>> batch(kBatch);
  for (std::size_t start = 0; start < count; start += kBatch) {
    const std::size_t len = std::min(kBatch, count - start);
    parallel_for(len, threads, [&](std::size_t i) {
      const std::size_t b = start + i;
      Rng sub_rng = make_rng(cfg.seed, Stream::subsample, b);
      const auto ids = draw_subsample(data.size(), cfg.s, sub_rng);
      batch[i].emplace(grow_tree(data, ids, cfg, grid, derive_seed(cfg.seed, Stream::tree, b)));
    });
    for (std::size_t i = 0; i < len; ++i) {
      visit(start + i, *batch[i]);
      batch[i].reset();
    }
  }
}

Eigen::MatrixXd tree_predictions(const Dataset& data, std::span<const Point> points,
                                 const ForestConfig& cfg, std::size_t threads) {
  check_points(points, data.dim());
  Eigen::MatrixXd preds(static_cast<Eigen::Index>(cfg.trees),
                        static_cast<Eigen::Index>(points.size()));
  for_each_tree(data, cfg, cfg.trees, threads, [&](std::size_t b, const Tree& tree) {
    for (std::size_t q = 0; q < points.size(); ++q) {
      preds(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(q)) = tree.predict(points[q]);
    }
  });
  return preds;
}

JointEstimate fit_forest(const Dataset& data, std::span<const Point> points,
                         const ForestConfig& cfg, std::size_t threads) {
  const Eigen::MatrixXd preds = tree_predictions(data, points, cfg, threads);
  JointEstimate est;
  est.points.assign(points.begin(), points.end());
  est.estimates = column_means(preds);
  est.cov = sample_covariance(preds);
  est.trees_used = cfg.trees;
  est.degenerate = cfg.trees < 2;
  est.config = cfg;
  return est;
}

Eigen::MatrixXd kernel_covariance(const Sampler& sampler, std::span<const Point> points,
                                  const ForestConfig& cfg, std::size_t reps,
                                  std::size_t threads) {
  check_points(points, sampler.dim());
  if (reps < 2) throw ConfigError("kernel_covariance: need at least two trees");
  const SplitGrid grid(sampler.dim(), cfg.grid_g, cfg.alpha);
  std::vector<std::size_t> ids(cfg.s);
  std::iota(ids.begin(), ids.end(), 0);
  Eigen::MatrixXd preds(static_cast<Eigen::Index>(reps), static_cast<Eigen::Index>(points.size()));
  parallel_for(reps, threads, [&](std::size_t r) {
    Rng rng = make_rng(cfg.seed, Stream::fresh, r);
    const Dataset sample = draw_dataset(sampler, cfg.s, rng);
    const Tree tree = grow_tree(sample, ids, cfg, grid, derive_seed(cfg.seed, Stream::tree, r));
    for (std::size_t q = 0; q < points.size(); ++q) {
      preds(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(q)) = tree.predict(points[q]);
    }
  });
  return sample_covariance(preds);
}

}  // namespace honestrf
