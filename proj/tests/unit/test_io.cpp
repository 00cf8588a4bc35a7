#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <vector>

#include "honestrf/core/csv.hpp"
#include "honestrf/core/errors.hpp"
#include "honestrf/core/powerlaw.hpp"

using namespace honestrf;

namespace {

double binom_loglik(std::span<const CountCell> cells, double a, double b, double centre) {
  double ll = 0.0;
  for (const auto& c : cells) {
    const double p = std::exp(a + b * (std::log(c.size) - centre));
    if (p >= 1.0) return -std::numeric_limits<double>::infinity();
    ll += static_cast<double>(c.successes) * std::log(p) +
          static_cast<double>(c.trials - c.successes) * std::log1p(-p);
  }
  return ll;
}

// Brute-force MLE on a grid followed by coordinate refinement.
// Returns (intercept on the raw log scale, slope).
std::pair<double, double> grid_mle(std::span<const CountCell> cells) {
  double centre = 0.0;
  for (const auto& c : cells) centre += std::log(c.size);
  centre /= static_cast<double>(cells.size());
  double best_a = 0, best_b = 0, best = -std::numeric_limits<double>::infinity();
  double step_a = 0.05, step_b = 0.05;
  double a0 = -6, a1 = 0, b0 = -6, b1 = 2;
  for (int round = 0; round < 5; ++round) {
    for (double a = a0; a <= a1; a += step_a) {
      for (double b = b0; b <= b1; b += step_b) {
        const double ll = binom_loglik(cells, a, b, centre);
        if (ll > best) { best = ll; best_a = a; best_b = b; }
      }
    }
    a0 = best_a - 2 * step_a; a1 = best_a + 2 * step_a;
    b0 = best_b - 2 * step_b; b1 = best_b + 2 * step_b;
    step_a /= 10; step_b /= 10;
  }
  return {best_a - best_b * centre, best_b};
}

}  // namespace

TEST_CASE("power-law fit recovers a planted exponent", "[powerlaw]") {
  std::vector<CountCell> cells;
  for (double s : {50.0, 100.0, 200.0, 400.0, 800.0}) {
    const double p = 0.2 * std::pow(s / 50.0, -2.0);
    const std::size_t trials = 10'000'000;
    cells.push_back({s, static_cast<std::size_t>(std::llround(p * trials)), trials});
  }
  const PowerLawFit fit = fit_binomial_power_law(cells);
  CHECK(fit.slope == Catch::Approx(-2.0).margin(2e-3));
  CHECK(fit.slope_lower < fit.slope);
  CHECK(fit.slope_upper > fit.slope);
  CHECK(fit.slope_upper < -1.99);
  CHECK(fit.nonzero_cells == 5);
  CHECK_FALSE(fit.slope_unbounded_below);
}

TEST_CASE("power-law MLE matches a brute-force grid search", "[powerlaw][property]") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const double slope = std::uniform_real_distribution<double>(-3.0, -0.3)(rng);
    std::vector<CountCell> cells;
    for (double s : {32.0, 64.0, 128.0, 256.0}) {
      const double p = 0.3 * std::pow(s / 32.0, slope);
      const std::size_t trials = 2000;
      cells.push_back({s, std::binomial_distribution<std::size_t>(trials, p)(rng), trials});
    }
    if (cells.back().successes == 0) continue;  // keep the MLE interior
    const PowerLawFit fit = fit_binomial_power_law(cells);
    const auto [a, b] = grid_mle(cells);
    INFO("planted " << slope);
    CHECK(fit.slope == Catch::Approx(b).margin(1e-4));
    CHECK(fit.intercept == Catch::Approx(a).margin(1e-3));
  }
}

TEST_CASE("power-law fit keeps zero cells", "[powerlaw]") {
  const std::vector<CountCell> cells{{100, 300, 1000}, {200, 40, 1000}, {400, 0, 1000}, {800, 0, 1000}};
  const PowerLawFit fit = fit_binomial_power_law(cells);
  CHECK(fit.cells == 4);
  CHECK(fit.nonzero_cells == 2);
  CHECK(fit.slope_upper < -1.0);
  const std::vector<CountCell> first_only{{100, 300, 1000}, {200, 0, 1000}, {400, 0, 1000}};
  const PowerLawFit cliff = fit_binomial_power_law(first_only);
  CHECK(cliff.slope_unbounded_below);
  CHECK(std::isinf(cliff.slope_lower));
  CHECK(cliff.slope_upper < -1.0);
}

TEST_CASE("power-law fit needs two sizes and a success", "[powerlaw]") {
  const std::vector<CountCell> one{{100, 5, 100}};
  CHECK_THROWS_AS(fit_binomial_power_law(one), InsufficientDataError);
  const std::vector<CountCell> none{{100, 0, 100}, {200, 0, 100}};
  CHECK_THROWS_AS(fit_binomial_power_law(none), InsufficientDataError);
}

TEST_CASE("constant probability has a slope bound above -1", "[powerlaw]") {
  const std::vector<CountCell> flat{{50, 3000, 10000}, {100, 3000, 10000}, {200, 3000, 10000}, {400, 3000, 10000}};
  const PowerLawFit fit = fit_binomial_power_law(flat);
  CHECK(fit.slope == Catch::Approx(0.0).margin(1e-6));
  CHECK(fit.slope_upper > -1.0);
}

TEST_CASE("csv quoting", "[csv]") {
  CHECK(csv_escape("plain") == "plain");
  CHECK(csv_escape("a,b") == "\"a,b\"");
  CHECK(csv_escape("say \"hi\"") == "\"say \"\"hi\"\"\"");
  CHECK(csv_escape("two\nlines") == "\"two\nlines\"");
  std::ostringstream out;
  {
    CsvWriter w(out, {"a", "b"});
    w.row({"1", "x,y"});
    CHECK_THROWS_AS(w.row({"only one"}), ConfigError);
  }
  CHECK(out.str() == "a,b\n1,\"x,y\"\n");
}

TEST_CASE("number formatting round-trips", "[csv][property]") {
  CHECK(format_number(0.0) == "0");
  CHECK(format_number(-0.0) == "0");
  CHECK(format_number(1.0) == "1");
  CHECK(format_number(0.1) == "0.1");
  CHECK(format_number(std::uint64_t{18446744073709551615ULL}) == "18446744073709551615");
  std::mt19937_64 rng(5);
  for (int i = 0; i < 10000; ++i) {
    const double v = std::uniform_real_distribution<double>(-1.0, 1.0)(rng) *
                     std::pow(10.0, std::uniform_int_distribution<int>(-30, 30)(rng));
    CHECK(std::stod(format_number(v)) == v);
  }
}
