#pragma once

#include <cstddef>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "honestrf/core/dataset.hpp"
#include "honestrf/sim/design.hpp"

namespace honestrf::sim {

enum class CurveScale { linear, log };

struct CurveRow {
  double distance = 0.0;     // mean L1 distance of the pairs in the bucket
  double correlation = 0.0;  // mean correlation (its log on the log scale)
  std::size_t count = 0;
  double stderr = 0.0;
};

/// Across-tree correlation of predictions as a function of L1 distance.
/// Row 0 holds only pairs at distance exactly zero; row j > 0 holds distances
/// in ((j-1) w, j w]. Empty buckets are omitted.
struct CorrelationCurve {
  std::vector<CurveRow> rows;
  CurveScale scale = CurveScale::linear;
  double bucket_width = 0.02;
  std::size_t evaluated = 0;  // pairs that entered a bucket
  std::size_t excluded = 0;   // pairs with a constant prediction on either side
  std::vector<Point> references;  // after snapping to cell centres
  std::size_t trees = 0;
};

struct SweepOptions {
  /// Empty means the mixture means plus the centre of the square.
  std::vector<Point> references;
  std::size_t cells = 101;      // cell centres per axis for the second point
  double bucket_width = 0.02;
  /// Move each reference to the nearest cell centre so that the pair of a
  /// reference with itself is part of the sweep.
  bool snap_references = true;
  std::size_t threads = 1;
};

/// Grows design.forest.trees trees once on one dataset of design.forest.n draws
/// and correlates the prediction at each reference with the prediction at every
/// cell centre.
CorrelationCurve correlation_sweep(const SimDesign& design, const SweepOptions& opts);

/// Log of the correlation on the leading rows above `floor`. The curve is cut
/// at the first row at or below the floor, so isolated noisy buckets far out
/// cannot enter a log-scale fit.
CorrelationCurve log_curve(const CorrelationCurve& curve, double floor = 0.01);

/// Sample correlation of two series; nullopt when either is constant.
std::optional<double> sample_correlation(std::span<const double> a, std::span<const double> b);

/// Pairs (j, j+1) of consecutive rows where the curve rises by more than
/// `n_se` combined standard errors.
std::vector<std::size_t> monotonicity_violations(const CorrelationCurve& curve, double n_se = 2.0);

/// R^2 of an ordinary least squares line through the log curve on rows with
/// distance in [0, max_distance] and correlation above `floor`.
double log_linear_r2(const CorrelationCurve& curve, double max_distance, double floor = 0.01);

struct HeuristicRow {
  double distance = 0.0;
  double observed = 0.0;
  double linear_bound = 0.0;
  double exponential_fit = 0.0;
  bool conservative = false;  // observed <= linear bound
};

struct HeuristicComparison {
  std::vector<HeuristicRow> rows;
  double lambda = 0.0;  // exp(-lambda d) fitted through the log curve
  double eps = 0.0;
  std::size_t s = 0;
  std::size_t p = 0;

  /// True when every row with distance above `min_distance` is conservative.
  bool conservative_beyond(double min_distance) const;
};

/// Linear bound max(1 - s^eps d / p, 0) and exponential fit per bucket; the
/// exponential rate is a least-squares fit through the origin over buckets
/// with correlation above 0.01.
HeuristicComparison heuristic_compare(const CorrelationCurve& curve, std::size_t s, std::size_t p,
                                      double eps);

/// Columns: distance, correlation, count, stderr.
void write_curve_csv(std::ostream& out, const CorrelationCurve& curve);
/// Columns: distance, observed, linear_bound, exponential_fit, conservative.
void write_heuristic_csv(std::ostream& out, const HeuristicComparison& cmp);

}  // namespace honestrf::sim
