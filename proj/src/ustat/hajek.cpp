#include "honestrf/ustat/hajek.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

#include "honestrf/core/errors.hpp"
#include "honestrf/core/numeric.hpp"
#include "honestrf/core/parallel.hpp"
#include "honestrf/core/tree.hpp"

namespace honestrf {

namespace {

// Responses of rows 1.. replaced by the regression function.
void smooth_tail(const Sampler& sampler, std::span<const double> x, std::size_t p,
                 std::vector<double>& y) {
  for (std::size_t i = 1; i < y.size(); ++i) {
    const auto m = sampler.regression(x.subspan(i * p, p));
    if (!m) throw ConfigError("hajek_variance: smoothed responses need a known regression function");
    y[i] = *m;
  }
}

struct FocusBox {
  Point lo, hi;
  double volume = 1.0;

  bool contains(std::span<const double> x) const {
    for (std::size_t d = 0; d < x.size(); ++d) {
      if (x[d] < lo[d] || x[d] > hi[d]) return false;
    }
    return true;
  }
};

std::vector<FocusBox> focus_boxes(std::span<const Point> points, double h) {
  std::vector<FocusBox> boxes;
  for (const auto& x : points) {
    FocusBox b;
    for (double v : x) {
      b.lo.push_back(std::max(0.0, v - h));
      b.hi.push_back(std::min(1.0, v + h));
      b.volume *= b.hi.back() - b.lo.back();
    }
    boxes.push_back(std::move(b));
  }
  return boxes;
}

}  // namespace

Eigen::MatrixXd HajekEstimate::v_hat_debiased() const {
  const Eigen::MatrixXd d = var_t1_debiased();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (d + d.transpose()));
  const Eigen::VectorXd vals = eig.eigenvalues().cwiseMax(0.0);
  const Eigen::MatrixXd psd = eig.eigenvectors() * vals.asDiagonal() * eig.eigenvectors().transpose();
  const double scale = static_cast<double>(s) * static_cast<double>(s) / static_cast<double>(n);
  return scale * 0.5 * (psd + psd.transpose());
}

HajekEstimate hajek_variance(const Sampler& sampler, std::span<const Point> points,
                             const ForestConfig& cfg, const HajekOptions& opts) {
  if (points.empty()) throw ConfigError("hajek_variance: at least one query point is required");
  if (opts.anchors < 2) throw ConfigError("hajek_variance: need at least two anchors");
  if (opts.mc_reps < 2) throw ConfigError("hajek_variance: need at least two repetitions per anchor");
  if (cfg.s < 1 || cfg.n < cfg.s) throw ConfigError("hajek_variance: need 1 <= s <= n");
  const std::size_t p = sampler.dim();
  for (const auto& x : points) {
    if (x.size() != p) throw ConfigError("hajek_variance: query point has the wrong dimension");
  }

  const bool focused = opts.focus_share > 0.0;
  std::vector<FocusBox> boxes;
  if (focused) {
    if (!(opts.focus_share < 1.0)) throw ConfigError("hajek_variance: focus share must be below 1");
    if (!(opts.focus_halfwidth > 0.0)) throw ConfigError("hajek_variance: focus half-width must be positive");
    if (opts.mode != HajekMode::paired) throw ConfigError("hajek_variance: focused anchors need paired mode");
    if (!sampler.density(points.front())) {
      throw ConfigError("hajek_variance: focused anchors need a sampler with a known density");
    }
    boxes = focus_boxes(points, opts.focus_halfwidth);
    for (const auto& b : boxes) {
      if (!(b.volume > 0.0)) throw ConfigError("hajek_variance: degenerate focus box");
    }
  }

  const auto q = static_cast<Eigen::Index>(points.size());
  const SplitGrid grid(p, cfg.grid_g, cfg.alpha);
  std::vector<std::size_t> ids(cfg.s);
  std::iota(ids.begin(), ids.end(), 0);
  const std::size_t anchors = opts.anchors;
  const std::size_t reps = opts.mc_reps;

  HajekEstimate est;
  est.mode = opts.mode;
  est.smooth_responses = opts.smooth_responses;
  est.anchors = anchors;
  est.mc_reps = reps;
  est.s = cfg.s;
  est.n = cfg.n;
  est.seed = cfg.seed;
  est.t1_values.resize(static_cast<Eigen::Index>(anchors), q);
  est.weights = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(anchors));
  const bool split = opts.split_anchor_response;
  // Per anchor: within-anchor covariance of the repetitions, and with a split
  // response the mean anchor weight W1 per query, its within covariance and
  // the response variance.
  std::vector<Eigen::MatrixXd> within(anchors), within_w(anchors);
  std::vector<Eigen::VectorXd> mean_w(anchors);
  std::vector<double> sigma2(anchors, 0.0);

  parallel_for(anchors, opts.threads, [&](std::size_t a) {
    const std::uint64_t anchor_seed = derive_seed(cfg.seed, Stream::anchor, a);
    Rng anchor_rng(anchor_seed);
    Point z(p);
    if (focused && std::uniform_real_distribution<double>()(anchor_rng) < opts.focus_share) {
      const auto& b = boxes[std::uniform_int_distribution<std::size_t>(0, boxes.size() - 1)(anchor_rng)];
      for (std::size_t d = 0; d < p; ++d) {
        z[d] = std::uniform_real_distribution<double>(b.lo[d], b.hi[d])(anchor_rng);
      }
    } else {
      sampler.sample_x(anchor_rng, z);
    }
    double z_y = sampler.sample_y(z, anchor_rng);
    if (split) {
      const auto m = sampler.regression(z);
      const auto v = sampler.conditional_variance(z);
      if (!m || !v) {
        throw ConfigError("hajek_variance: a split anchor response needs the regression and noise variance");
      }
      z_y = *m;
      sigma2[a] = *v;
    }
    if (focused) {
      const double f = *sampler.density(z);
      double u = 0.0;
      for (const auto& b : boxes) {
        if (b.contains(z)) u += 1.0 / b.volume;
      }
      u /= static_cast<double>(boxes.size());
      est.weights(static_cast<Eigen::Index>(a)) = f / ((1.0 - opts.focus_share) * f + opts.focus_share * u);
    }

    Eigen::MatrixXd vals(static_cast<Eigen::Index>(reps), q);
    Eigen::MatrixXd wts = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(reps), q);
    for (std::size_t r = 0; r < reps; ++r) {
      const auto ri = static_cast<Eigen::Index>(r);
      Rng rng(derive_seed(anchor_seed, Stream::fresh, r));
      const Dataset drawn = draw_dataset_with_first(sampler, cfg.s, z, rng);
      // The anchor's response is held fixed: T1 conditions on the whole Z_1 = (x, y).
      std::vector<double> ys(drawn.ys().begin(), drawn.ys().end());
      ys[0] = z_y;
      if (opts.smooth_responses) smooth_tail(sampler, drawn.xs(), p, ys);
      const Dataset sample = drawn.with_responses(ys);
      const std::uint64_t tree_seed = derive_seed(anchor_seed, Stream::tree, r);
      const Tree tree = grow_tree(sample, ids, cfg, grid, tree_seed);
      for (Eigen::Index k = 0; k < q; ++k) {
        const TreeNode& leaf = tree.nodes()[tree.leaf_id(points[static_cast<std::size_t>(k)])];
        vals(ri, k) = leaf.terminal->mean;
        const auto& members = leaf.terminal->members;
        if (split && !members.empty() && members.front() == 0) {
          wts(ri, k) = 1.0 / static_cast<double>(leaf.terminal->count);
        }
      }
      if (opts.mode == HajekMode::paired) {
        // Swap z for a fresh draw; everything else, including xi, is shared.
        std::vector<double> x(sample.xs().begin(), sample.xs().end());
        ys[0] = sampler.sample(rng, std::span<double>(x.data(), p));
        if (split) ys[0] = *sampler.regression(std::span<const double>(x.data(), p));
        const Dataset swapped(p, std::move(x), ys);
        const Tree other = grow_tree(swapped, ids, cfg, grid, tree_seed);
        for (Eigen::Index k = 0; k < q; ++k) {
          vals(ri, k) -= other.predict(points[static_cast<std::size_t>(k)]);
        }
      }
    }
    est.t1_values.row(static_cast<Eigen::Index>(a)) = column_means(vals).transpose();
    within[a] = sample_covariance(vals);
    if (split) {
      mean_w[a] = column_means(wts);
      within_w[a] = sample_covariance(wts);
    }
  });

  // Per-anchor contribution to Var T1, before removing the repetition noise.
  auto weighted_sum = [&](const std::function<double(std::size_t)>& term) {
    CompensatedSum acc;
    for (std::size_t a = 0; a < anchors; ++a) acc.add(est.weights(static_cast<Eigen::Index>(a)) * term(a));
    return acc.value() / static_cast<double>(anchors);
  };
  const double inv_reps = 1.0 / static_cast<double>(reps);
  if (focused) {
    // Paired values are already centred, so the weighted second moment is the
    // covariance.
    est.var_t1.resize(q, q);
  } else {
    est.var_t1 = sample_covariance(est.t1_values);
  }
  est.t1_noise.resize(q, q);
  for (Eigen::Index i = 0; i < q; ++i) {
    for (Eigen::Index j = i; j < q; ++j) {
      if (focused) {
        est.var_t1(i, j) = weighted_sum([&](std::size_t a) {
          const auto ai = static_cast<Eigen::Index>(a);
          return est.t1_values(ai, i) * est.t1_values(ai, j);
        });
      }
      double noise = weighted_sum([&](std::size_t a) { return within[a](i, j) * inv_reps; });
      if (split) {
        est.var_t1(i, j) += weighted_sum([&](std::size_t a) { return sigma2[a] * mean_w[a](i) * mean_w[a](j); });
        noise += weighted_sum([&](std::size_t a) { return sigma2[a] * within_w[a](i, j) * inv_reps; });
      }
      est.t1_noise(i, j) = est.t1_noise(j, i) = noise;
      est.var_t1(j, i) = est.var_t1(i, j);
    }
  }
  est.var_t1_se.resize(q);
  for (Eigen::Index i = 0; i < q; ++i) {
    const double centre = focused ? 0.0 : est.t1_values.col(i).mean();
    std::vector<double> u(anchors);
    for (std::size_t a = 0; a < anchors; ++a) {
      const auto ai = static_cast<Eigen::Index>(a);
      const double d = est.t1_values(ai, i) - centre;
      double v = d * d - within[a](i, i) * inv_reps;
      if (split) v += sigma2[a] * (mean_w[a](i) * mean_w[a](i) - within_w[a](i, i) * inv_reps);
      u[a] = est.weights(ai) * v;
    }
    CompensatedSum m;
    for (double v : u) m.add(v);
    const double mean = m.value() / static_cast<double>(anchors);
    CompensatedSum ss;
    for (double v : u) ss.add((v - mean) * (v - mean));
    est.var_t1_se(i) = std::sqrt(ss.value() / static_cast<double>(anchors - 1) / static_cast<double>(anchors));
  }
  const double scale = static_cast<double>(cfg.s) * static_cast<double>(cfg.s) /
                       static_cast<double>(cfg.n);
  est.v_hat = scale * est.var_t1;
  return est;
}

}  // namespace honestrf
