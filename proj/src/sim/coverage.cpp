#include "honestrf/sim/coverage.hpp"

#include <algorithm>
#include <cmath>

#include "honestrf/core/csv.hpp"
#include "honestrf/core/errors.hpp"
#include "honestrf/core/numeric.hpp"
#include "honestrf/core/parallel.hpp"
#include "honestrf/ustat/forest.hpp"

namespace honestrf::sim {

double Contrast::truth() const {
  return MixtureSampler::regression_function(x) - MixtureSampler::regression_function(x_bar);
}

double Contrast::l1_distance() const {
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) d += std::abs(x[i] - x_bar[i]);
  return d;
}

const char* mode_name(IntervalMode mode) {
  return mode == IntervalMode::diagonal ? "diagonal" : "heuristic";
}

CoverageTable coverage_table(const SimDesign& design, std::span<const Contrast> contrasts,
                             const CoverageOptions& opts) {
  design.validate();
  if (contrasts.empty()) throw ConfigError("coverage: at least one contrast is required");
  if (opts.trials < 100) throw ConfigError("coverage: at least 100 trials are required");
  if (!(opts.level > 0.0 && opts.level < 1.0)) throw ConfigError("coverage: level must lie in (0, 1)");

  CoverageTable table;
  std::vector<std::pair<std::size_t, std::size_t>> index;
  auto locate = [&](const Point& p) {
    if (p.size() != 2) throw ConfigError("coverage: contrast points must be two-dimensional");
    const auto it = std::find(table.points.begin(), table.points.end(), p);
    if (it != table.points.end()) return static_cast<std::size_t>(it - table.points.begin());
    table.points.push_back(p);
    return table.points.size() - 1;
  };
  for (const auto& c : contrasts) index.emplace_back(locate(c.x), locate(c.x_bar));
  const std::size_t q = table.points.size();

  const MixtureSampler sampler(design);
  ForestConfig hcfg = design.forest;
  hcfg.seed = derive_seed(design.seed, Stream::anchor, 0);
  HajekOptions hopts = opts.hajek;
  hopts.threads = opts.threads;
  hopts.focus_halfwidth /= std::sqrt(static_cast<double>(design.forest.s));
  table.variance = hajek_variance(sampler, table.points, hcfg, hopts);
  if (opts.debias) table.variance.v_hat = table.variance.v_hat_debiased();

  const IntervalMode modes[] = {IntervalMode::diagonal, IntervalMode::heuristic};
  // covered[t][c][mode], half widths likewise
  std::vector<std::vector<char>> hit(opts.trials);
  std::vector<std::vector<double>> width(opts.trials);
  std::vector<std::vector<double>> centre(opts.trials);
  parallel_for(opts.trials, opts.threads, [&](std::size_t t) {
    const std::uint64_t trial_seed = derive_seed(design.seed, Stream::trial, t);
    Rng rng = make_rng(trial_seed, Stream::data, 0);
    const Dataset data = sample_design(design, design.forest.n, rng);
    ForestConfig cfg = design.forest;
    cfg.seed = derive_seed(trial_seed, Stream::tree, 0);
    const JointEstimate est = fit_forest(data, table.points, cfg, 1);
    for (std::size_t c = 0; c < contrasts.size(); ++c) {
      const auto func = FunctionalSpec::contrast(q, index[c].first, index[c].second);
      for (IntervalMode mode : modes) {
        IntervalOptions io;
        io.level = opts.level;
        io.mode = mode;
        io.eps = opts.eps;
        const Interval iv = confidence_interval(est, table.variance, func, io);
        hit[t].push_back(iv.covers(contrasts[c].truth()) ? 1 : 0);
        width[t].push_back(iv.half_width);
        centre[t].push_back(iv.center);
      }
    }
  });

  for (std::size_t c = 0; c < contrasts.size(); ++c) {
    for (std::size_t m = 0; m < 2; ++m) {
      CoverageRow row;
      row.contrast = contrasts[c].name;
      row.mode = modes[m];
      row.level = opts.level;
      row.trials = opts.trials;
      row.l1_distance = contrasts[c].l1_distance();
      CompensatedSum w, e, e2;
      const double truth = contrasts[c].truth();
      for (std::size_t t = 0; t < opts.trials; ++t) {
        row.covered += static_cast<std::size_t>(hit[t][2 * c + m]);
        w.add(width[t][2 * c + m]);
        e.add(centre[t][2 * c + m] - truth);
      }
      const double tn = static_cast<double>(opts.trials);
      row.mean_error = e.value() / tn;
      for (std::size_t t = 0; t < opts.trials; ++t) {
        const double dev = centre[t][2 * c + m] - truth - row.mean_error;
        e2.add(dev * dev);
      }
      row.empirical_sd = std::sqrt(e2.value() / (tn - 1.0));
      row.coverage = static_cast<double>(row.covered) / static_cast<double>(row.trials);
      row.mean_half_width = w.value() / static_cast<double>(row.trials);
      table.rows.push_back(row);
    }
  }
  return table;
}

void write_coverage_csv(std::ostream& out, const CoverageTable& table) {
  CsvWriter w(out, {"contrast", "mode", "level", "coverage", "trials"});
  for (const auto& r : table.rows) {
    w.row({r.contrast, mode_name(r.mode), format_number(r.level), format_number(r.coverage),
           format_number(static_cast<std::uint64_t>(r.trials))});
  }
}

}  // namespace honestrf::sim
