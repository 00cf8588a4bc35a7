#include "honestrf/sim/sweep.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>

#include "honestrf/core/csv.hpp"
#include "honestrf/core/errors.hpp"
#include "honestrf/core/numeric.hpp"
#include "honestrf/ustat/forest.hpp"
#include "honestrf/ustat/intervals.hpp"

namespace honestrf::sim {

namespace {

double cell_centre(std::size_t i, std::size_t cells) {
  return (static_cast<double>(i) + 0.5) / static_cast<double>(cells);
}

double snap(double v, std::size_t cells) {
  const double idx = std::floor(v * static_cast<double>(cells));
  const auto i = static_cast<std::size_t>(std::clamp(idx, 0.0, static_cast<double>(cells - 1)));
  return cell_centre(i, cells);
}

constexpr std::size_t kJackknifeGroups = 20;

struct Bucket {
  CompensatedSum distance, corr;
  std::vector<CompensatedSum> loo;  // bucket sums with one tree group left out
  std::size_t count = 0;
};

// Running mean and centred second moment.
struct Moments {
  std::size_t n = 0;
  double mean = 0.0;
  double m2 = 0.0;

  // Returns (x - old mean, x - new mean).
  std::pair<double, double> push(double x) {
    ++n;
    const double d = x - mean;
    mean += d / static_cast<double>(n);
    const double e = x - mean;
    m2 += d * e;
    return {d, e};
  }

  void merge(const Moments& o) {
    if (o.n == 0) return;
    if (n == 0) {
      *this = o;
      return;
    }
    const double total = static_cast<double>(n + o.n);
    const double d = o.mean - mean;
    m2 += o.m2 + d * d * static_cast<double>(n) * static_cast<double>(o.n) / total;
    mean += d * static_cast<double>(o.n) / total;
    n += o.n;
  }
};

}  // namespace

std::optional<double> sample_correlation(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) throw ConfigError("sample_correlation: need two equal series");
  CompensatedSum sa, sb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sa.add(a[i]);
    sb.add(b[i]);
  }
  const double ma = sa.value() / static_cast<double>(a.size());
  const double mb = sb.value() / static_cast<double>(b.size());
  CompensatedSum saa, sbb, sab;
  for (std::size_t i = 0; i < a.size(); ++i) {
    saa.add((a[i] - ma) * (a[i] - ma));
    sbb.add((b[i] - mb) * (b[i] - mb));
    sab.add((a[i] - ma) * (b[i] - mb));
  }
  if (saa.value() == 0.0 || sbb.value() == 0.0) return std::nullopt;
  return std::clamp(sab.value() / std::sqrt(saa.value() * sbb.value()), -1.0, 1.0);
}

CorrelationCurve correlation_sweep(const SimDesign& design, const SweepOptions& opts) {
  design.validate();
  if (design.forest.trees < 2) throw ConfigError("correlation sweep: need at least two trees");
  if (opts.cells < 1) throw ConfigError("correlation sweep: need at least one cell per axis");
  if (!(opts.bucket_width > 0.0)) throw ConfigError("correlation sweep: bucket width must be positive");

  CorrelationCurve curve;
  curve.bucket_width = opts.bucket_width;
  curve.trees = design.forest.trees;
  curve.references = opts.references;
  if (curve.references.empty()) {
    curve.references = design.means;
    curve.references.push_back({0.5, 0.5});
  }
  for (auto& r : curve.references) {
    if (r.size() != 2) throw ConfigError("correlation sweep: references must be two-dimensional");
    if (opts.snap_references) {
      for (auto& v : r) v = snap(v, opts.cells);
    }
  }

  Rng data_rng = make_rng(design.seed, Stream::data, 0);
  const Dataset data = sample_design(design, design.forest.n, data_rng);
  ForestConfig cfg = design.forest;
  cfg.seed = derive_seed(design.seed, Stream::tree, 0);

  const std::size_t nref = curve.references.size();
  const std::size_t ncell = opts.cells * opts.cells;
  std::vector<Point> cells(ncell);
  for (std::size_t i = 0; i < opts.cells; ++i) {
    for (std::size_t j = 0; j < opts.cells; ++j) {
      cells[i * opts.cells + j] = {cell_centre(i, opts.cells), cell_centre(j, opts.cells)};
    }
  }

  // Streaming co-moments per tree group; trees arrive in index order so the
  // result does not depend on the thread count. The groups give a delete-a-group
  // jackknife for the bucket means, which keeps the dependence between pairs
  // that share a reference or a tree.
  const std::size_t groups = std::min<std::size_t>(kJackknifeGroups, cfg.trees);
  std::vector<Moments> ref_m(groups * nref), cell_m(groups * ncell);
  std::vector<double> co(groups * nref * ncell, 0.0);
  std::vector<double> dr(nref), pc(ncell);
  for_each_tree(data, cfg, cfg.trees, opts.threads, [&](std::size_t b, const Tree& tree) {
    const std::size_t g = b * groups / cfg.trees;
    Moments* rm = ref_m.data() + g * nref;
    Moments* cm = cell_m.data() + g * ncell;
    for (std::size_t r = 0; r < nref; ++r) dr[r] = rm[r].push(tree.predict(curve.references[r])).first;
    for (std::size_t c = 0; c < ncell; ++c) pc[c] = cm[c].push(tree.predict(cells[c])).second;
    for (std::size_t r = 0; r < nref; ++r) {
      double* row = co.data() + (g * nref + r) * ncell;
      for (std::size_t c = 0; c < ncell; ++c) row[c] += dr[r] * pc[c];
    }
  });

  // Pooled moments over all groups (drop = groups) or all but one.
  auto pooled = [&](std::size_t drop, std::size_t r, std::size_t c) {
    Moments a, bm;
    double cab = 0.0;
    for (std::size_t g = 0; g < groups; ++g) {
      if (g == drop) continue;
      const Moments& ga = ref_m[g * nref + r];
      const Moments& gb = cell_m[g * ncell + c];
      cab += co[(g * nref + r) * ncell + c];
      if (a.n > 0) {
        const double w = static_cast<double>(a.n) * static_cast<double>(ga.n) /
                         static_cast<double>(a.n + ga.n);
        cab += w * (ga.mean - a.mean) * (gb.mean - bm.mean);
      }
      a.merge(ga);
      bm.merge(gb);
    }
    return std::tuple<double, double, double>{a.m2, bm.m2, cab};
  };
  auto correlation = [](double m2a, double m2b, double cab) {
    if (m2a == 0.0 || m2b == 0.0) return std::optional<double>{};
    return std::optional<double>{std::clamp(cab / std::sqrt(m2a * m2b), -1.0, 1.0)};
  };

  std::map<std::size_t, Bucket> buckets;
  for (std::size_t r = 0; r < nref; ++r) {
    for (std::size_t c = 0; c < ncell; ++c) {
      const auto [m2a, m2b, cab] = pooled(groups, r, c);
      const auto full = correlation(m2a, m2b, cab);
      if (!full) {
        ++curve.excluded;
        continue;
      }
      const double d = std::abs(curve.references[r][0] - cells[c][0]) +
                       std::abs(curve.references[r][1] - cells[c][1]);
      const std::size_t key =
          d == 0.0 ? 0 : std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(d / opts.bucket_width)));
      Bucket& b = buckets[key];
      if (b.loo.empty()) b.loo.assign(groups, CompensatedSum{});
      b.distance.add(d);
      b.corr.add(d == 0.0 ? 1.0 : *full);
      for (std::size_t g = 0; g < groups && groups > 1; ++g) {
        const auto [la, lb, lab] = pooled(g, r, c);
        b.loo[g].add(d == 0.0 ? 1.0 : correlation(la, lb, lab).value_or(*full));
      }
      ++b.count;
      ++curve.evaluated;
    }
  }
  for (const auto& [key, b] : buckets) {
    CurveRow row;
    const auto n = static_cast<double>(b.count);
    row.count = b.count;
    row.distance = b.distance.value() / n;
    row.correlation = b.corr.value() / n;
    if (groups > 1) {
      CompensatedSum mean, sq;
      for (const auto& l : b.loo) mean.add(l.value() / n);
      const double m = mean.value() / static_cast<double>(groups);
      for (const auto& l : b.loo) sq.add((l.value() / n - m) * (l.value() / n - m));
      row.stderr = std::sqrt(static_cast<double>(groups - 1) / static_cast<double>(groups) * sq.value());
    }
    curve.rows.push_back(row);
  }
  return curve;
}

CorrelationCurve log_curve(const CorrelationCurve& curve, double floor) {
  if (curve.scale == CurveScale::log) return curve;
  CorrelationCurve out = curve;
  out.scale = CurveScale::log;
  out.rows.clear();
  for (const auto& r : curve.rows) {
    if (!(r.correlation > floor)) break;
    out.rows.push_back({r.distance, std::log(r.correlation), r.count, r.stderr / r.correlation});
  }
  return out;
}

std::vector<std::size_t> monotonicity_violations(const CorrelationCurve& curve, double n_se) {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j + 1 < curve.rows.size(); ++j) {
    const auto& a = curve.rows[j];
    const auto& b = curve.rows[j + 1];
    if (b.correlation > a.correlation + n_se * std::hypot(a.stderr, b.stderr)) out.push_back(j);
  }
  return out;
}

double log_linear_r2(const CorrelationCurve& curve, double max_distance, double floor) {
  const CorrelationCurve lc = log_curve(curve, floor);
  std::vector<double> x, y;
  for (const auto& r : lc.rows) {
    if (r.distance <= max_distance) {
      x.push_back(r.distance);
      y.push_back(r.correlation);
    }
  }
  if (x.size() < 3) throw InsufficientDataError("log-linear fit: fewer than three buckets in range");
  return ols_fit(x, y).r_squared;
}

bool HeuristicComparison::conservative_beyond(double min_distance) const {
  return std::all_of(rows.begin(), rows.end(), [&](const HeuristicRow& r) {
    return r.distance <= min_distance || r.conservative;
  });
}

HeuristicComparison heuristic_compare(const CorrelationCurve& curve, std::size_t s, std::size_t p,
                                      double eps) {
  if (curve.rows.empty()) throw InsufficientDataError("heuristic comparison: empty curve");
  if (curve.scale != CurveScale::linear) throw ConfigError("heuristic comparison: needs the linear curve");
  HeuristicComparison cmp;
  cmp.eps = eps;
  cmp.s = s;
  cmp.p = p;
  CompensatedSum dy, dd;
  for (const auto& r : log_curve(curve).rows) {
    dy.add(r.distance * r.correlation);
    dd.add(r.distance * r.distance);
  }
  cmp.lambda = dd.value() > 0.0 ? -dy.value() / dd.value() : 0.0;
  const double scale = std::pow(static_cast<double>(s), eps) / static_cast<double>(p);
  for (const auto& r : curve.rows) {
    HeuristicRow h;
    h.distance = r.distance;
    h.observed = r.correlation;
    h.linear_bound = std::max(1.0 - scale * r.distance, 0.0);
    h.exponential_fit = std::exp(-cmp.lambda * r.distance);
    h.conservative = h.observed <= h.linear_bound;
    cmp.rows.push_back(h);
  }
  return cmp;
}

void write_curve_csv(std::ostream& out, const CorrelationCurve& curve) {
  CsvWriter w(out, {"distance", "correlation", "count", "stderr"});
  for (const auto& r : curve.rows) {
    w.row({format_number(r.distance), format_number(r.correlation),
           format_number(static_cast<std::uint64_t>(r.count)), format_number(r.stderr)});
  }
}

void write_heuristic_csv(std::ostream& out, const HeuristicComparison& cmp) {
  CsvWriter w(out, {"distance", "observed", "linear_bound", "exponential_fit", "conservative"});
  for (const auto& r : cmp.rows) {
    w.row({format_number(r.distance), format_number(r.observed), format_number(r.linear_bound),
           format_number(r.exponential_fit), r.conservative ? "true" : "false"});
  }
}

}  // namespace honestrf::sim
