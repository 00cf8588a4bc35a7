#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "honestrf/core/config.hpp"
#include "honestrf/core/dataset.hpp"

namespace honestrf {

struct Observation {
  Point x;
  double y = 0.0;
};

/// Symmetric, vector-valued statistic of `arity` observations.
using Kernel = std::function<Eigen::VectorXd(std::span<const Observation>)>;

/// Tree prediction at the query points with the coin randomization integrated
/// out exactly. The arity is the number of observations passed in.
Kernel tree_kernel(const ForestConfig& cfg, std::vector<Point> queries);

/// M-weighted inner product E[f_k^T M f_l] between the order-k and order-l
/// Hoeffding components evaluated on shared leading arguments.
struct OrderInnerProduct {
  int k = 0;
  int l = 0;
  double value = 0.0;
  double stderr = 0.0;  // zero for exact enumeration
};

struct HoeffdingReport {
  int arity = 0;
  Eigen::VectorXd mean;                   // E f
  std::vector<OrderInnerProduct> cross;   // all k < l
  std::vector<double> component_energy;   // E[f_k^T M f_k], k = 1..arity
  double max_component_mean = 0.0;        // max |E f_k| entry
  double residual = 0.0;                  // reconstruction error of f from its components
  std::size_t reps = 0;

  double max_abs_cross() const;
};

/// Full decomposition over a finite support, for direct inspection. f2 and f3
/// are laid out with the first argument slowest.
struct ExactDecomposition {
  Eigen::VectorXd mean;
  std::vector<Eigen::VectorXd> f1;  // K entries
  std::vector<Eigen::VectorXd> f2;  // K^2 entries
  std::vector<Eigen::VectorXd> f3;  // K^3 entries (arity 3 only)
};

ExactDecomposition hoeffding_decompose_exact(const Kernel& kernel, const DiscreteSampler& dist,
                                             int arity);

/// Orthogonality report by exhaustive enumeration of the support.
HoeffdingReport hoeffding_exact(const Kernel& kernel, const DiscreteSampler& dist, int arity,
                                const Eigen::MatrixXd& metric);

struct HoeffdingMcOptions {
  std::size_t reps = 2000;   // outer draws of (Z_1, ..., Z_r)
  std::size_t inner = 200;   // draws per conditional expectation
  std::uint64_t seed = 0;
  std::size_t threads = 1;
};

/// Monte Carlo version: conditional expectations by explicit inner averages.
/// Factors of each inner product use independent inner draws so the product is
/// unbiased for the population value.
HoeffdingReport hoeffding_check(const Kernel& kernel, const Sampler& sampler, int arity,
                                const Eigen::MatrixXd& metric, const HoeffdingMcOptions& opts);

/// Monte Carlo estimate of f1(z) = E[f | Z_1 = z] - E f.
Eigen::VectorXd estimate_f1(const Kernel& kernel, const Sampler& sampler, int arity,
                            const Observation& z, const Eigen::VectorXd& mean, std::size_t draws,
                            Rng& rng);

}  // namespace honestrf
