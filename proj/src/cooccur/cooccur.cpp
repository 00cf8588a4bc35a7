#include "honestrf/cooccur/cooccur.hpp"

#include <cmath>
#include <numeric>

#include "honestrf/core/csv.hpp"
#include "honestrf/core/errors.hpp"
#include "honestrf/core/parallel.hpp"
#include "honestrf/core/tree.hpp"

namespace honestrf {

namespace {

void check_point(const Point& x, std::size_t p) {
  if (x.size() != p) throw ConfigError("cooccur: query point has the wrong dimension");
  for (double v : x) {
    if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("cooccur: query points must lie in [0, 1]^p");
  }
}

void check_config(const ForestConfig& cfg) {
  if (cfg.s < 1) throw ConfigError("cooccur: s must be at least 1");
  if (cfg.trees < 1) throw ConfigError("cooccur: need at least one tree");
  if (!(cfg.delta >= 0.0 && cfg.delta <= 1.0)) throw ConfigError("cooccur: delta must lie in [0, 1]");
}

// Shared-leaf indicator for each of `count` trees grown on fresh samples. When
// `pinned` is set, observation 0 of every sample sits there.
std::size_t count_shared(const Sampler& sampler, const Point& a, const Point& b,
                         const Point* pinned, const ForestConfig& cfg, std::uint64_t seed,
                         std::size_t count, std::size_t threads) {
  const SplitGrid grid(sampler.dim(), cfg.grid_g, cfg.alpha);
  std::vector<std::size_t> ids(cfg.s);
  std::iota(ids.begin(), ids.end(), 0);
  std::vector<unsigned char> shared(count, 0);
  parallel_for(count, threads, [&](std::size_t r) {
    Rng rng = make_rng(seed, Stream::fresh, r);
    const Dataset sample = pinned ? draw_dataset_with_first(sampler, cfg.s, *pinned, rng)
                                  : draw_dataset(sampler, cfg.s, rng);
    const Tree tree = grow_tree(sample, ids, cfg, grid, derive_seed(seed, Stream::tree, r));
    shared[r] = tree.leaf_id(a) == tree.leaf_id(b);
  });
  return static_cast<std::size_t>(std::accumulate(shared.begin(), shared.end(), std::size_t{0}));
}

double binomial_se(double p, std::size_t n) {
  return std::sqrt(std::max(p * (1.0 - p), 0.0) / static_cast<double>(n));
}

}  // namespace

double CooccurEstimate::l1_distance() const {
  double d = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) d += std::abs(x[j] - x_bar[j]);
  return d;
}

CooccurEstimate estimate_m(const Sampler& sampler, const Point& x, const Point& x_bar,
                           const ForestConfig& cfg, bool conditional, std::size_t threads) {
  check_point(x, sampler.dim());
  check_point(x_bar, sampler.dim());
  check_config(cfg);
  CooccurEstimate est;
  est.x = x;
  est.x_bar = x_bar;
  est.trees = cfg.trees;
  est.conditional = conditional;
  est.s = cfg.s;
  est.delta = cfg.delta;
  est.hits = count_shared(sampler, x, x_bar, conditional ? &x_bar : nullptr, cfg, cfg.seed,
                          cfg.trees, threads);
  est.m_hat = static_cast<double>(est.hits) / static_cast<double>(est.trees);
  est.stderr = binomial_se(est.m_hat, est.trees);
  est.upper_bound = clopper_pearson_upper(est.hits, est.trees, 0.95);
  return est;
}

DecayFit decay_fit(std::span<const DecayPoint> series, double level) {
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("decay_fit: level must lie in (0, 1)");
  DecayFit fit;
  fit.level = level;
  std::vector<double> lx;
  std::vector<double> ly;
  for (const auto& pt : series) {
    if (!(pt.s > 0.0) || !(pt.m_hat >= 0.0)) throw ConfigError("decay_fit: invalid cell");
    if (pt.m_hat == 0.0) {
      ++fit.dropped;
      continue;
    }
    lx.push_back(std::log(pt.s));
    ly.push_back(std::log(pt.m_hat));
  }
  fit.dropped_zero_cells = fit.dropped > 0;
  fit.used = lx.size();
  if (fit.used < 3) throw InsufficientDataError("decay_fit: fewer than three nonzero cells");
  fit.line = ols_fit(lx, ly);
  fit.slope = fit.line.slope;
  fit.slope_se = fit.line.slope_se;
  const double df = static_cast<double>(fit.used) - 2.0;
  const double t_one = student_t_quantile(df, level);
  const double t_two = student_t_quantile(df, 0.5 + level / 2.0);
  fit.slope_upper = fit.slope + t_one * fit.slope_se;
  fit.band_lower = fit.slope - t_two * fit.slope_se;
  fit.band_upper = fit.slope + t_two * fit.slope_se;
  return fit;
}

DecayFit decay_fit(std::span<const CooccurEstimate> series, double level) {
  std::vector<DecayPoint> pts;
  for (const auto& e : series) pts.push_back({static_cast<double>(e.s), e.m_hat});
  return decay_fit(pts, level);
}

PowerLawFit decay_fit_counts(std::span<const CooccurEstimate> series, double level) {
  std::vector<CountCell> cells;
  for (const auto& e : series) cells.push_back({static_cast<double>(e.s), e.hits, e.trees});
  return fit_binomial_power_law(cells, level);
}

InclusionEstimate inclusion_probability(const Sampler& sampler, const Point& z, const Point& x,
                                        const ForestConfig& cfg, std::size_t threads) {
  check_point(z, sampler.dim());
  check_point(x, sampler.dim());
  check_config(cfg);
  InclusionEstimate est;
  est.trees = cfg.trees;
  est.hits = count_shared(sampler, z, x, &z, cfg, cfg.seed, cfg.trees, threads);
  est.p = static_cast<double>(est.hits) / static_cast<double>(est.trees);
  est.stderr = binomial_se(est.p, est.trees);
  return est;
}

MKernelEstimate m_kernel(const Sampler& sampler, const Point& x, const Point& x_bar,
                         const ForestConfig& cfg, std::size_t anchors, std::size_t threads) {
  if (anchors < 1) throw ConfigError("m_kernel: need at least one anchor");
  check_point(x, sampler.dim());
  check_point(x_bar, sampler.dim());
  check_config(cfg);
  std::vector<double> prod(anchors);
  std::vector<double> px(anchors);
  std::vector<double> pxb(anchors);
  // Anchors run serially; their tree sets are spread over the workers.
  for (std::size_t a = 0; a < anchors; ++a) {
    const std::uint64_t anchor_seed = derive_seed(cfg.seed, Stream::anchor, a);
    Rng rng(anchor_seed);
    Point z(sampler.dim());
    sampler.sample_x(rng, z);
    ForestConfig first = cfg;
    first.seed = derive_seed(anchor_seed, Stream::probe, 0);
    ForestConfig second = cfg;
    second.seed = derive_seed(anchor_seed, Stream::probe, 1);
    px[a] = inclusion_probability(sampler, z, x, first, threads).p;
    pxb[a] = inclusion_probability(sampler, z, x_bar, second, threads).p;
    prod[a] = px[a] * pxb[a];
  }
  MKernelEstimate est;
  est.anchors = anchors;
  est.trees_per_anchor = cfg.trees;
  est.value = compensated_mean(prod);
  est.mean_inclusion_x = compensated_mean(px);
  est.mean_inclusion_x_bar = compensated_mean(pxb);
  if (anchors > 1) {
    CompensatedSum ss;
    for (double v : prod) ss.add((v - est.value) * (v - est.value));
    est.stderr = std::sqrt(ss.value() / static_cast<double>(anchors - 1) /
                           static_cast<double>(anchors));
  }
  return est;
}

void write_cooccur_csv(std::ostream& out, std::span<const CooccurEstimate> rows) {
  CsvWriter csv(out, {"s", "delta", "l1_distance", "m_hat", "stderr", "conditional"});
  for (const auto& r : rows) {
    csv.row({format_number(static_cast<std::uint64_t>(r.s)), format_number(r.delta),
             format_number(r.l1_distance()), format_number(r.m_hat), format_number(r.stderr),
             r.conditional ? "true" : "false"});
  }
}

}  // namespace honestrf
