#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "honestrf/core/config.hpp"
#include "honestrf/core/dataset.hpp"
#include "honestrf/core/tree.hpp"

namespace honestrf {

/// Forest estimates at q query points plus the across-tree covariance of the
/// per-tree predictions (Var T at subsample scale).
struct JointEstimate {
  std::vector<Point> points;
  Eigen::VectorXd estimates;
  Eigen::MatrixXd cov;
  std::size_t trees_used = 0;
  bool degenerate = false;  // fewer than two trees: cov reported as zeros
  ForestConfig config;
};

/// Uniform size-s subset of {0..n-1} without replacement, ascending.
std::vector<std::size_t> draw_subsample(std::size_t n, std::size_t s, Rng& rng);

/// Grows tree b on its own subsample for b in [0, count) and hands each tree to
/// `visit` in index order. Trees are grown in parallel batches; the visitor
/// runs on the calling thread so it may accumulate without locking.
void for_each_tree(const Dataset& data, const ForestConfig& cfg, std::size_t count,
                   std::size_t threads, const std::function<void(std::size_t, const Tree&)>& visit);

/// Per-tree predictions, one row per tree.
Eigen::MatrixXd tree_predictions(const Dataset& data, std::span<const Point> points,
                                 const ForestConfig& cfg, std::size_t threads = 1);

/// Incomplete U-statistic forest: cfg.trees subsamples of size cfg.s drawn
/// without replacement from the data.
JointEstimate fit_forest(const Dataset& data, std::span<const Point> points,
                         const ForestConfig& cfg, std::size_t threads = 1);

/// Covariance of the tree kernel at the query points, estimated from `reps`
/// trees each grown on a fresh size-s sample from the generative model.
Eigen::MatrixXd kernel_covariance(const Sampler& sampler, std::span<const Point> points,
                                  const ForestConfig& cfg, std::size_t reps,
                                  std::size_t threads = 1);

}  // namespace honestrf
