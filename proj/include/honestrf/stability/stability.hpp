#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "honestrf/core/dataset.hpp"
#include "honestrf/core/powerlaw.hpp"
#include "honestrf/core/rng.hpp"

namespace honestrf {

/// Axis-aligned node rectangle in real coordinates.
struct NodeBox {
  std::vector<double> lo;
  std::vector<double> hi;

  static NodeBox unit(std::size_t p);
  std::size_t dim() const noexcept { return lo.size(); }
  bool contains(std::span<const double> x) const noexcept;
  void sample(Rng& rng, std::span<double> x) const;
};

/// Row-major view of the points entering a split. Row 0 is the distinguished
/// observation X_1.
struct PointsView {
  std::span<const double> data;
  std::size_t p = 0;

  std::size_t size() const noexcept { return p == 0 ? 0 : data.size() / p; }
  std::span<const double> row(std::size_t i) const noexcept { return data.subspan(i * p, p); }
};

/// Outcome of a split rule: an identifier comparable across calls, plus the
/// geometric cut when the rule splits the box along an axis.
struct RuleSplit {
  std::int64_t id = 0;
  std::optional<std::size_t> axis;
  double cut = 0.0;

  friend bool operator==(const RuleSplit& a, const RuleSplit& b) { return a.id == b.id; }
};

/// Deterministic split rule. std::nullopt signals failure on degenerate input.
using SplitRule = std::function<std::optional<RuleSplit>(const PointsView&, const NodeBox&)>;

/// Histogram key used for failed rule evaluations.
inline constexpr std::int64_t kRuleFailure = INT64_MIN;

struct CouplingRun {
  std::string rule;
  std::size_t m = 0;
  std::size_t reps = 0;       // coupled draws that entered the estimate
  std::size_t disagree = 0;
  std::size_t failures = 0;   // draws where either side failed
  double tv_hat = 0.0;        // disagree / reps
  double tv_hist = 0.0;       // half L1 distance between the two split histograms
  Point x1;
  int depth = 1;
  std::size_t first_level_disagree = 0;  // depth 2: draws dropped because S1 != S1'
  std::map<std::int64_t, std::size_t> fresh_hist;
  std::map<std::int64_t, std::size_t> pinned_hist;

  double tv_se() const;
};

struct CouplingOptions {
  std::size_t reps = 20000;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
};

/// Each draw shares X_2..X_m between S = rule(fresh X_1, ...) and
/// S' = rule(x1, ...). Failure is treated as an outcome of its own.
CouplingRun coupled_split_tv(const std::string& name, const SplitRule& rule, const NodeBox& box,
                             std::size_t m, const Point& x1, const CouplingOptions& opts);

/// Two-level version: draws with S1 == S1' are kept and the coupling is rerun
/// inside the child of the first split that holds x1, on the points that fell
/// there. The rule must report geometric cuts.
CouplingRun coupled_split_tv_depth2(const std::string& name, const SplitRule& rule,
                                    const NodeBox& box, std::size_t m, const Point& x1,
                                    const CouplingOptions& opts);

/// Split histogram from independent draws: X_1 = x1 when given, fresh otherwise.
std::map<std::int64_t, std::size_t> split_histogram(const SplitRule& rule, const NodeBox& box,
                                                    std::size_t m, const std::optional<Point>& x1,
                                                    const CouplingOptions& opts);

struct StabilityVerdict {
  bool stable = false;
  double delta_hat = 0.0;    // -slope - 1
  double delta_lower = 0.0;  // from the one-sided upper bound on the slope
  double slope = 0.0;
  double slope_upper = 0.0;
  bool all_zero = false;           // no disagreement anywhere: bounds only
  std::vector<double> tv_upper;    // one-sided Clopper-Pearson bound per size
  std::optional<PowerLawFit> fit;
};

/// Power-law fit of disagreement counts against node size. Needs at least four
/// geometrically spaced sizes. Stable when the slope is below -1 at `level`.
StabilityVerdict stability_classify(std::span<const CouplingRun> runs, double level = 0.95);

using Feature = std::function<double(std::span<const double>)>;
using Objective = std::function<double(std::span<const double>)>;

/// Rule returning argmax_i objectives[i](mu) (ties to the lowest index), where
/// mu holds the node means of each feature. Needs at least two objectives.
SplitRule lipschitz_mean_rule(std::vector<Feature> features, std::vector<Objective> objectives);

/// criterion_split on the node's points over the uniform grid of resolution g.
/// The box must be aligned with that grid.
SplitRule centroid_rule(std::size_t g, double alpha);

/// Axis of the largest coordinate of X_1: a deliberately unstable rule.
SplitRule argmax_first_rule();

/// Applies `inner` to X_2..X_m only.
SplitRule ignore_first_rule(SplitRule inner);

/// Columns: rule, m, reps, disagree, tv_hat, tv_hist, depth.
void write_stability_csv(std::ostream& out, std::span<const CouplingRun> runs);

}  // namespace honestrf
