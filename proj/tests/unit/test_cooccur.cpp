#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>
#include <vector>

#include "honestrf/cooccur/cooccur.hpp"
#include "honestrf/core/errors.hpp"

using namespace honestrf;

namespace {

ForestConfig cfg_for(std::size_t s, std::size_t trees, std::size_t k, std::uint64_t seed) {
  ForestConfig c;
  c.n = s;
  c.s = s;
  c.trees = trees;
  c.delta = 0.6;
  c.alpha = 0.1;
  c.k = k;
  c.grid_g = 51;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("a point always shares its own leaf", "[cooccur]") {
  const UniformSampler sampler(2);
  const Point x{0.3, 0.6};
  const auto est = estimate_m(sampler, x, x, cfg_for(64, 200, 1, 1), false);
  CHECK(est.m_hat == 1.0);
  CHECK(est.hits == 200);
  CHECK(est.l1_distance() == 0.0);
  CHECK(est.stderr == 0.0);
}

TEST_CASE("opposite corners rarely share a leaf", "[cooccur]") {
  const UniformSampler sampler(2);
  const auto est = estimate_m(sampler, {0.05, 0.05}, {0.95, 0.95}, cfg_for(256, 300, 1, 2), false);
  CHECK(est.m_hat == 0.0);
  CHECK(est.upper_bound > 0.0);
  CHECK(est.upper_bound < 0.02);
  CHECK(est.l1_distance() == Catch::Approx(1.8));
}

TEST_CASE("co-occurrence shrinks with the subsample size", "[cooccur]") {
  const UniformSampler sampler(2);
  const Point x{0.2, 0.2}, xb{0.3, 0.3};
  const auto small = estimate_m(sampler, x, xb, cfg_for(32, 1000, 4, 3), false);
  const auto large = estimate_m(sampler, x, xb, cfg_for(512, 1000, 4, 4), false);
  CHECK(large.m_hat < small.m_hat);
  CHECK(small.upper_bound >= small.m_hat);
}

TEST_CASE("co-occurrence is thread-count independent", "[cooccur]") {
  const UniformSampler sampler(2);
  const auto a = estimate_m(sampler, {0.2, 0.2}, {0.3, 0.3}, cfg_for(64, 300, 2, 5), true, 1);
  const auto b = estimate_m(sampler, {0.2, 0.2}, {0.3, 0.3}, cfg_for(64, 300, 2, 5), true, 3);
  CHECK(a.hits == b.hits);
  CHECK(a.conditional);
}

TEST_CASE("log-log fit recovers planted slopes", "[cooccur]") {
  std::vector<DecayPoint> pts;
  for (double s : {128.0, 256.0, 512.0, 1024.0}) pts.push_back({s, 3.0 * std::pow(s, -2.0)});
  const DecayFit fit = decay_fit(pts);
  CHECK(fit.slope == Catch::Approx(-2.0).margin(1e-12));
  CHECK(fit.slope_upper == Catch::Approx(-2.0).margin(1e-9));
  CHECK(fit.used == 4);
  CHECK_FALSE(fit.dropped_zero_cells);

  pts.push_back({2048.0, 0.0});
  const DecayFit with_zero = decay_fit(pts);
  CHECK(with_zero.dropped == 1);
  CHECK(with_zero.dropped_zero_cells);

  const std::vector<DecayPoint> short_series{{128, 0.1}, {256, 0.05}, {512, 0.0}};
  CHECK_THROWS_AS(decay_fit(short_series), InsufficientDataError);
}

TEST_CASE("noisy log-log fit has a confidence band around the slope", "[cooccur]") {
  const std::vector<DecayPoint> pts{{100, 0.1}, {200, 0.03}, {400, 0.008}, {800, 0.0025}};
  const DecayFit fit = decay_fit(pts);
  CHECK(fit.band_lower < fit.slope);
  CHECK(fit.slope < fit.slope_upper);
  CHECK(fit.slope_upper < fit.band_upper);
}

TEST_CASE("count-based fit accepts estimates with zero hits", "[cooccur]") {
  std::vector<CooccurEstimate> rows(4);
  const std::size_t hits[] = {400, 60, 2, 0};
  for (std::size_t i = 0; i < 4; ++i) {
    rows[i].s = 128u << i;
    rows[i].trees = 1000;
    rows[i].hits = hits[i];
    rows[i].m_hat = hits[i] / 1000.0;
  }
  const PowerLawFit fit = decay_fit_counts(rows);
  CHECK(fit.cells == 4);
  CHECK(fit.slope_upper < -1.0);
}

TEST_CASE("pinned z equal to x always shares the leaf", "[cooccur]") {
  const UniformSampler sampler(2);
  const auto inc = inclusion_probability(sampler, {0.4, 0.4}, {0.4, 0.4}, cfg_for(64, 100, 1, 6));
  CHECK(inc.p == 1.0);
  const auto far = inclusion_probability(sampler, {0.05, 0.05}, {0.95, 0.95}, cfg_for(64, 100, 1, 7));
  CHECK(far.p == 0.0);
}

TEST_CASE("m kernel at x = x_bar dominates the squared mean inclusion", "[cooccur]") {
  const UniformSampler sampler(2);
  const Point x{0.5, 0.5};
  const auto mk = m_kernel(sampler, x, x, cfg_for(32, 60, 2, 8), 300);
  CHECK(mk.value >= 0.0);
  CHECK(mk.value + 3 * mk.stderr >= mk.mean_inclusion_x * mk.mean_inclusion_x_bar);
  CHECK(mk.anchors == 300);
}

TEST_CASE("co-occurrence csv layout", "[cooccur][csv]") {
  CooccurEstimate e;
  e.x = {0.25, 0.25};
  e.x_bar = {0.5, 0.5};
  e.s = 128;
  e.delta = 0.6;
  e.m_hat = 0.25;
  e.stderr = 0.01;
  std::ostringstream out;
  const std::vector<CooccurEstimate> rows{e};
  write_cooccur_csv(out, rows);
  CHECK(out.str() == "s,delta,l1_distance,m_hat,stderr,conditional\n128,0.6,0.5,0.25,0.01,false\n");
}
