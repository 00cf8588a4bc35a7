#pragma once

#include <cstddef>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "honestrf/sim/design.hpp"
#include "honestrf/ustat/hajek.hpp"
#include "honestrf/ustat/intervals.hpp"

namespace honestrf::sim {

struct Contrast {
  std::string name;
  Point x;
  Point x_bar;

  double truth() const;
  double l1_distance() const;
};

struct CoverageOptions {
  double level = 0.95;
  std::size_t trials = 200;
  double eps = 0.0;  // heuristic-mode exponent
  /// Variance of the projection, estimated once per table: it is a property
  /// of the design and the forest configuration, not of any one dataset.
  /// focus_halfwidth is given in units of 1/sqrt(s).
  HajekOptions hajek = default_hajek();
  /// Use the noise-corrected projection variance. The raw estimate carries
  /// the Monte Carlo error of every anchor's T1 and overstates V.
  bool debias = true;
  std::size_t threads = 1;

  static HajekOptions default_hajek() {
    HajekOptions h;
    h.anchors = 1000;
    h.mc_reps = 10;
    h.mode = HajekMode::paired;
    h.smooth_responses = true;
    h.focus_share = 0.5;
    h.focus_halfwidth = 1.5;
    h.split_anchor_response = true;
    return h;
  }
};

struct CoverageRow {
  std::string contrast;
  IntervalMode mode = IntervalMode::diagonal;
  double level = 0.95;
  double coverage = 0.0;
  std::size_t covered = 0;
  std::size_t trials = 0;
  double mean_half_width = 0.0;
  double l1_distance = 0.0;
  double mean_error = 0.0;    // mean of estimate - truth across trials
  double empirical_sd = 0.0;  // spread of the contrast estimate across trials
};

struct CoverageTable {
  std::vector<CoverageRow> rows;  // contrasts in input order, diagonal then heuristic
  std::vector<Point> points;      // distinct query points
  HajekEstimate variance;
};

/// Each trial draws a fresh dataset of design.forest.n points, fits the forest
/// at every contrast point and forms both interval modes for every contrast.
CoverageTable coverage_table(const SimDesign& design, std::span<const Contrast> contrasts,
                             const CoverageOptions& opts);

const char* mode_name(IntervalMode mode);

/// Columns: contrast, mode, level, coverage, trials.
void write_coverage_csv(std::ostream& out, const CoverageTable& table);

}  // namespace honestrf::sim
