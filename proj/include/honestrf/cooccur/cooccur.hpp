#pragma once

#include <cstddef>
#include <ostream>
#include <span>
#include <vector>

#include "honestrf/core/config.hpp"
#include "honestrf/core/dataset.hpp"
#include "honestrf/core/numeric.hpp"
#include "honestrf/core/powerlaw.hpp"

namespace honestrf {

/// Frequency with which two query points land in the same terminal node of a
/// tree grown on a fresh size-s sample.
struct CooccurEstimate {
  Point x;
  Point x_bar;
  double m_hat = 0.0;
  std::size_t hits = 0;
  std::size_t trees = 0;
  bool conditional = false;  // one sample point pinned at x_bar
  double stderr = 0.0;       // sqrt(m_hat (1 - m_hat) / trees)
  double upper_bound = 1.0;  // one-sided 95% Clopper-Pearson bound
  std::size_t s = 0;
  double delta = 0.0;

  double l1_distance() const;
};

/// Grows cfg.trees trees, each on its own fresh sample of size cfg.s.
CooccurEstimate estimate_m(const Sampler& sampler, const Point& x, const Point& x_bar,
                           const ForestConfig& cfg, bool conditional, std::size_t threads = 1);

struct DecayPoint {
  double s = 0.0;
  double m_hat = 0.0;
};

/// Least-squares slope of log m_hat on log s. Cells with m_hat = 0 are dropped
/// and counted.
struct DecayFit {
  LineFit line;
  double slope = 0.0;
  double slope_se = 0.0;
  double slope_upper = 0.0;  // one-sided bound at `level` (Student t, n - 2 df)
  double band_lower = 0.0;   // two-sided band at `level`
  double band_upper = 0.0;
  double level = 0.95;
  std::size_t used = 0;
  std::size_t dropped = 0;
  bool dropped_zero_cells = false;
};

/// Throws InsufficientDataError with fewer than three usable cells.
DecayFit decay_fit(std::span<const DecayPoint> series, double level = 0.95);
DecayFit decay_fit(std::span<const CooccurEstimate> series, double level = 0.95);

/// Binomial power-law fit over the raw hit counts, keeping zero-hit cells.
PowerLawFit decay_fit_counts(std::span<const CooccurEstimate> series, double level = 0.95);

/// Probability that z and x share a leaf when z is pinned as one of the sample
/// points, estimated from cfg.trees trees.
struct InclusionEstimate {
  double p = 0.0;
  std::size_t hits = 0;
  std::size_t trees = 0;
  double stderr = 0.0;
};

InclusionEstimate inclusion_probability(const Sampler& sampler, const Point& z, const Point& x,
                                        const ForestConfig& cfg, std::size_t threads = 1);

/// E[P(I_x | X_1) P(I_xbar | X_1)] over anchors X_1 drawn from the sampler. The
/// two inclusion probabilities of each anchor come from independent tree sets
/// of cfg.trees trees each.
struct MKernelEstimate {
  double value = 0.0;
  double stderr = 0.0;
  double mean_inclusion_x = 0.0;
  double mean_inclusion_x_bar = 0.0;
  std::size_t anchors = 0;
  std::size_t trees_per_anchor = 0;
};

MKernelEstimate m_kernel(const Sampler& sampler, const Point& x, const Point& x_bar,
                         const ForestConfig& cfg, std::size_t anchors, std::size_t threads = 1);

/// Columns: s, delta, l1_distance, m_hat, stderr, conditional.
void write_cooccur_csv(std::ostream& out, std::span<const CooccurEstimate> rows);

}  // namespace honestrf
