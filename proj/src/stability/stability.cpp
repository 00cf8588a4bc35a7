#include "honestrf/stability/stability.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "honestrf/core/csv.hpp"
#include "honestrf/core/errors.hpp"
#include "honestrf/core/numeric.hpp"
#include "honestrf/core/parallel.hpp"
#include "honestrf/core/split_grid.hpp"
#include "honestrf/core/tree.hpp"

namespace honestrf {

namespace {

std::int64_t key(const std::optional<RuleSplit>& s) { return s ? s->id : kRuleFailure; }

void check_coupling_inputs(const NodeBox& box, std::size_t m, const Point& x1,
                           const CouplingOptions& opts) {
  if (m < 2) throw ConfigError("coupling: node size m must be at least 2");
  if (opts.reps < 1) throw ConfigError("coupling: need at least one repetition");
  if (x1.size() != box.dim()) throw ConfigError("coupling: x1 has the wrong dimension");
  if (!box.contains(x1)) throw ConfigError("coupling: x1 must lie in the node");
}

double half_l1(const std::map<std::int64_t, std::size_t>& a,
               const std::map<std::int64_t, std::size_t>& b, double na, double nb) {
  if (na == 0.0 || nb == 0.0) return 0.0;
  std::map<std::int64_t, std::pair<std::size_t, std::size_t>> joint;
  for (const auto& [k, v] : a) joint[k].first = v;
  for (const auto& [k, v] : b) joint[k].second = v;
  CompensatedSum acc;
  for (const auto& [k, v] : joint) {
    acc.add(std::abs(static_cast<double>(v.first) / na - static_cast<double>(v.second) / nb));
  }
  return 0.5 * acc.value();
}

struct Draw {
  std::int64_t fresh = kRuleFailure;
  std::int64_t pinned = kRuleFailure;
  bool used = true;
  bool first_disagree = false;
};

CouplingRun summarize(const std::string& name, std::size_t m, const Point& x1, int depth,
                      const std::vector<Draw>& draws) {
  CouplingRun run;
  run.rule = name;
  run.m = m;
  run.x1 = x1;
  run.depth = depth;
  for (const auto& d : draws) {
    if (d.first_disagree) ++run.first_level_disagree;
    if (!d.used) continue;
    ++run.reps;
    ++run.fresh_hist[d.fresh];
    ++run.pinned_hist[d.pinned];
    if (d.fresh == kRuleFailure || d.pinned == kRuleFailure) ++run.failures;
    if (d.fresh != d.pinned) ++run.disagree;
  }
  if (run.reps > 0) {
    const auto n = static_cast<double>(run.reps);
    run.tv_hat = static_cast<double>(run.disagree) / n;
    run.tv_hist = half_l1(run.fresh_hist, run.pinned_hist, n, n);
  }
  return run;
}

// Bounds of `box` as indices of the grid of resolution g.
std::vector<std::uint32_t> grid_indices(std::span<const double> v, std::size_t g) {
  std::vector<std::uint32_t> out;
  for (double x : v) {
    const double scaled = x * static_cast<double>(g);
    const double r = std::round(scaled);
    if (std::abs(scaled - r) > 1e-9) throw ConfigError("centroid rule: node box is not grid aligned");
    out.push_back(static_cast<std::uint32_t>(r));
  }
  return out;
}

}  // namespace

NodeBox NodeBox::unit(std::size_t p) { return NodeBox{std::vector<double>(p, 0.0), std::vector<double>(p, 1.0)}; }

bool NodeBox::contains(std::span<const double> x) const noexcept {
  for (std::size_t j = 0; j < lo.size(); ++j) {
    if (x[j] < lo[j] || x[j] > hi[j]) return false;
  }
  return true;
}

void NodeBox::sample(Rng& rng, std::span<double> x) const {
  for (std::size_t j = 0; j < lo.size(); ++j) x[j] = lo[j] + (hi[j] - lo[j]) * uniform01(rng);
}

double CouplingRun::tv_se() const {
  if (reps == 0) return 0.0;
  return std::sqrt(tv_hat * (1.0 - tv_hat) / static_cast<double>(reps));
}

CouplingRun coupled_split_tv(const std::string& name, const SplitRule& rule, const NodeBox& box,
                             std::size_t m, const Point& x1, const CouplingOptions& opts) {
  check_coupling_inputs(box, m, x1, opts);
  const std::size_t p = box.dim();
  std::vector<Draw> draws(opts.reps);
  parallel_for(opts.reps, opts.threads, [&](std::size_t r) {
    Rng rng = make_rng(opts.seed, Stream::coupling, r);
    std::vector<double> pts(m * p);
    for (std::size_t i = 1; i < m; ++i) box.sample(rng, std::span<double>(pts).subspan(i * p, p));
    box.sample(rng, std::span<double>(pts).first(p));
    const PointsView view{pts, p};
    draws[r].fresh = key(rule(view, box));
    std::copy(x1.begin(), x1.end(), pts.begin());
    draws[r].pinned = key(rule(view, box));
  });
  return summarize(name, m, x1, 1, draws);
}

CouplingRun coupled_split_tv_depth2(const std::string& name, const SplitRule& rule,
                                    const NodeBox& box, std::size_t m, const Point& x1,
                                    const CouplingOptions& opts) {
  check_coupling_inputs(box, m, x1, opts);
  const std::size_t p = box.dim();
  std::vector<Draw> draws(opts.reps);
  parallel_for(opts.reps, opts.threads, [&](std::size_t r) {
    Rng rng = make_rng(opts.seed, Stream::coupling, r);
    std::vector<double> pts(m * p);
    for (std::size_t i = 1; i < m; ++i) box.sample(rng, std::span<double>(pts).subspan(i * p, p));
    box.sample(rng, std::span<double>(pts).first(p));
    const PointsView view{pts, p};
    const auto s1 = rule(view, box);
    std::copy(x1.begin(), x1.end(), pts.begin());
    const auto s1_pinned = rule(view, box);
    Draw& d = draws[r];
    if (key(s1) != key(s1_pinned) || !s1_pinned) {
      d.used = false;
      d.first_disagree = key(s1) != key(s1_pinned);
      return;
    }
    if (!s1_pinned->axis) throw ConfigError("coupling: depth 2 needs a rule with geometric cuts");
    const std::size_t axis = *s1_pinned->axis;
    const double cut = s1_pinned->cut;
    NodeBox child = box;
    const bool left = x1[axis] < cut;
    (left ? child.hi : child.lo)[axis] = cut;

    // Child sample: the distinguished slot first, then the shared points on x1's side.
    std::vector<double> inner(p);
    for (std::size_t i = 1; i < m; ++i) {
      const auto row = view.row(i);
      if ((row[axis] < cut) == left) inner.insert(inner.end(), row.begin(), row.end());
    }
    if (inner.size() / p < 2) {
      d.fresh = d.pinned = kRuleFailure;
      return;
    }
    child.sample(rng, std::span<double>(inner).first(p));
    const PointsView child_view{inner, p};
    d.fresh = key(rule(child_view, child));
    std::copy(x1.begin(), x1.end(), inner.begin());
    d.pinned = key(rule(child_view, child));
  });
  return summarize(name, m, x1, 2, draws);
}

std::map<std::int64_t, std::size_t> split_histogram(const SplitRule& rule, const NodeBox& box,
                                                    std::size_t m, const std::optional<Point>& x1,
                                                    const CouplingOptions& opts) {
  if (m < 2) throw ConfigError("split_histogram: node size m must be at least 2");
  const std::size_t p = box.dim();
  std::vector<std::int64_t> keys(opts.reps);
  parallel_for(opts.reps, opts.threads, [&](std::size_t r) {
    Rng rng = make_rng(opts.seed, Stream::probe, r);
    std::vector<double> pts(m * p);
    for (std::size_t i = 0; i < m; ++i) box.sample(rng, std::span<double>(pts).subspan(i * p, p));
    if (x1) std::copy(x1->begin(), x1->end(), pts.begin());
    keys[r] = key(rule(PointsView{pts, p}, box));
  });
  std::map<std::int64_t, std::size_t> hist;
  for (auto k : keys) ++hist[k];
  return hist;
}

StabilityVerdict stability_classify(std::span<const CouplingRun> runs, double level) {
  if (runs.size() < 4) throw InsufficientDataError("stability_classify: need at least four node sizes");
  std::vector<const CouplingRun*> sorted;
  for (const auto& r : runs) sorted.push_back(&r);
  std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->m < b->m; });
  const double ratio = static_cast<double>(sorted[1]->m) / static_cast<double>(sorted[0]->m);
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i]->reps == 0) throw InsufficientDataError("stability_classify: empty run");
    const double r = static_cast<double>(sorted[i]->m) / static_cast<double>(sorted[i - 1]->m);
    if (!(ratio > 1.0) || std::abs(r / ratio - 1.0) > 0.1) {
      throw ConfigError("stability_classify: node sizes must be geometrically spaced");
    }
  }

  StabilityVerdict v;
  std::vector<CountCell> cells;
  std::size_t total = 0;
  for (const auto* r : sorted) {
    cells.push_back({static_cast<double>(r->m), r->disagree, r->reps});
    v.tv_upper.push_back(clopper_pearson_upper(r->disagree, r->reps, level));
    total += r->disagree;
  }
  if (total == 0) {
    v.all_zero = true;
    v.stable = true;
    v.delta_hat = std::numeric_limits<double>::infinity();
    v.delta_lower = std::numeric_limits<double>::quiet_NaN();
    v.slope = -std::numeric_limits<double>::infinity();
    v.slope_upper = std::numeric_limits<double>::quiet_NaN();
    return v;
  }
  v.fit = fit_binomial_power_law(cells, level);
  v.slope = v.fit->slope_unbounded_below ? -std::numeric_limits<double>::infinity() : v.fit->slope;
  v.slope_upper = v.fit->slope_upper;
  v.delta_hat = -v.slope - 1.0;
  v.delta_lower = -v.slope_upper - 1.0;
  v.stable = v.slope_upper < -1.0;
  return v;
}

SplitRule lipschitz_mean_rule(std::vector<Feature> features, std::vector<Objective> objectives) {
  if (objectives.size() < 2) throw ConfigError("lipschitz_mean_rule: need at least two objectives");
  if (features.empty()) throw ConfigError("lipschitz_mean_rule: need at least one feature");
  return [features = std::move(features), objectives = std::move(objectives)](
             const PointsView& pts, const NodeBox&) -> std::optional<RuleSplit> {
    const std::size_t n = pts.size();
    if (n == 0) throw ConfigError("lipschitz_mean_rule: empty node");
    std::vector<double> mu(features.size());
    for (std::size_t q = 0; q < features.size(); ++q) {
      CompensatedSum acc;
      for (std::size_t i = 0; i < n; ++i) acc.add(features[q](pts.row(i)));
      mu[q] = acc.value() / static_cast<double>(n);
    }
    std::size_t best = 0;
    double best_val = objectives[0](mu);
    for (std::size_t i = 1; i < objectives.size(); ++i) {
      const double v = objectives[i](mu);
      if (v > best_val) {
        best_val = v;
        best = i;
      }
    }
    return RuleSplit{static_cast<std::int64_t>(best), std::nullopt, 0.0};
  };
}

SplitRule centroid_rule(std::size_t g, double alpha) {
  return [g, alpha](const PointsView& pts, const NodeBox& box) -> std::optional<RuleSplit> {
    const std::size_t n = pts.size();
    if (n == 0) return std::nullopt;
    const SplitGrid grid(pts.p, g, alpha);
    const Dataset data(pts.p, std::vector<double>(pts.data.begin(), pts.data.end()),
                       std::vector<double>(n, 0.0));
    std::vector<std::size_t> ids(n);
    std::iota(ids.begin(), ids.end(), 0);
    const auto lo = grid_indices(box.lo, g);
    const auto hi = grid_indices(box.hi, g);
    const auto split = criterion_split(data, ids, lo, hi, grid);
    if (!split) return std::nullopt;
    return RuleSplit{static_cast<std::int64_t>(split->axis * (g + 1) + split->cut_index),
                     split->axis, split->cut};
  };
}

SplitRule argmax_first_rule() {
  return [](const PointsView& pts, const NodeBox&) -> std::optional<RuleSplit> {
    if (pts.size() == 0) return std::nullopt;
    const auto x = pts.row(0);
    const auto it = std::max_element(x.begin(), x.end());
    return RuleSplit{static_cast<std::int64_t>(it - x.begin()), std::nullopt, 0.0};
  };
}

SplitRule ignore_first_rule(SplitRule inner) {
  return [inner = std::move(inner)](const PointsView& pts, const NodeBox& box) {
    return inner(PointsView{pts.data.subspan(pts.p), pts.p}, box);
  };
}

void write_stability_csv(std::ostream& out, std::span<const CouplingRun> runs) {
  CsvWriter csv(out, {"rule", "m", "reps", "disagree", "tv_hat", "tv_hist", "depth"});
  for (const auto& r : runs) {
    csv.row({r.rule, format_number(static_cast<std::uint64_t>(r.m)),
             format_number(static_cast<std::uint64_t>(r.reps)),
             format_number(static_cast<std::uint64_t>(r.disagree)), format_number(r.tv_hat),
             format_number(r.tv_hist), format_number(static_cast<std::uint64_t>(r.depth))});
  }
}

}  // namespace honestrf
