#pragma once

#include <cstddef>
#include <span>

#include <Eigen/Dense>

#include "honestrf/core/config.hpp"
#include "honestrf/core/dataset.hpp"

namespace honestrf {

enum class HajekMode {
  /// Average of predictions of trees grown with z forced into the sample.
  direct,
  /// Each repetition also grows the same tree (same xi, same Z_2..Z_s) with a
  /// fresh Z_1 in place of z and keeps the difference. The difference has mean
  /// T1(z) - E T and lower variance.
  paired,
};

struct HajekOptions {
  std::size_t anchors = 200;
  std::size_t mc_reps = 20;
  HajekMode mode = HajekMode::direct;
  /// Replace the responses of Z_2..Z_s with E[Y | X]. Trees are honest, so T is
  /// linear in the responses given the covariates and T1 is unchanged; only
  /// the Monte Carlo noise drops. Needs a sampler that knows its regression.
  bool smooth_responses = false;
  /// Importance sampling of anchors. With probability `focus_share` an anchor
  /// is drawn uniformly from a box of half-width `focus_halfwidth` around a
  /// query point, otherwise from the sampler; each anchor is weighted by the
  /// density ratio. T1 - E T is only large near the query points, so plain
  /// anchors waste most of the budget once leaves are small. Paired mode and a
  /// sampler with a known density are required.
  double focus_share = 0.0;
  /// Grow with the anchor's response set to E[Y | x] and add the response
  /// noise analytically: T is linear in that response with coefficient W_1,
  /// the anchor's weight in the leaf average, so
  /// Var T1 = Var E[T | x, y = E[Y|x]] + E[Var(Y|x) E[W_1 | x]^2].
  /// Needs the regression and the conditional variance.
  bool split_anchor_response = false;
  double focus_halfwidth = 0.0;
  std::size_t threads = 1;
};

/// Monte Carlo estimate of the Hajek projection variance.
///
/// T1(z) = E[T(z, Z_2, ..., Z_s)] is estimated for each anchor z by forcing z
/// into `mc_reps` fresh subsamples. The variance of the projected forest is
/// V = (s^2 / n) Var T1(Z).
struct HajekEstimate {
  HajekMode mode = HajekMode::direct;
  bool smooth_responses = false;
  Eigen::MatrixXd t1_values;  // anchors x q; centred at E T in paired mode
  Eigen::MatrixXd var_t1;     // covariance of T1 across anchors (weighted when focused)
  Eigen::MatrixXd v_hat;      // (s^2 / n) * var_t1
  /// Mean within-anchor covariance of the per-repetition values divided by
  /// mc_reps: the part of var_t1 due to estimating T1 with finitely many trees.
  Eigen::MatrixXd t1_noise;
  /// Standard error of each diagonal entry of var_t1_debiased, from the
  /// spread of the per-anchor contributions.
  Eigen::VectorXd var_t1_se;
  /// Importance weight per anchor; all ones without focusing.
  Eigen::VectorXd weights;
  std::size_t anchors = 0;
  std::size_t mc_reps = 0;
  std::size_t s = 0;
  std::size_t n = 0;
  std::uint64_t seed = 0;

  /// var_t1 minus t1_noise: unbiased for Var T1 but not guaranteed PSD.
  Eigen::MatrixXd var_t1_debiased() const { return var_t1 - t1_noise; }
  /// (s^2 / n) times var_t1_debiased projected onto the PSD cone.
  Eigen::MatrixXd v_hat_debiased() const;
  /// Var of the Hajek projection of the tree kernel, s * Var T1.
  Eigen::MatrixXd var_t_ring() const { return static_cast<double>(s) * var_t1; }
};

HajekEstimate hajek_variance(const Sampler& sampler, std::span<const Point> points,
                             const ForestConfig& cfg, const HajekOptions& opts);

inline HajekEstimate hajek_variance(const Sampler& sampler, std::span<const Point> points,
                                    const ForestConfig& cfg, std::size_t anchors,
                                    std::size_t mc_reps, std::size_t threads = 1,
                                    HajekMode mode = HajekMode::direct) {
  HajekOptions opts;
  opts.anchors = anchors;
  opts.mc_reps = mc_reps;
  opts.mode = mode;
  opts.threads = threads;
  return hajek_variance(sampler, points, cfg, opts);
}

}  // namespace honestrf
