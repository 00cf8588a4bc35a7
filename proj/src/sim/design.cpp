#include "honestrf/sim/design.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include <boost/math/distributions/normal.hpp>

#include "honestrf/core/errors.hpp"

namespace honestrf::sim {

void SimDesign::validate() const {
  if (means.empty()) throw ConfigError("design: at least one mixture component is required");
  for (const auto& m : means) {
    if (m.size() != 2) throw ConfigError("design: mixture means must be two-dimensional");
    for (double v : m) {
      if (!(v > 0.0 && v < 1.0)) throw ConfigError("design: mixture means must lie inside (0,1)^2");
    }
  }
  if (!(noise > 0.0)) throw ConfigError("design: noise scale must be positive");
  forest.validate();
}

MixtureSampler::MixtureSampler(std::vector<Point> means, double noise)
    : means_(std::move(means)), noise_(noise) {
  if (means_.empty()) throw ConfigError("mixture: no components");
  for (const auto& m : means_) {
    if (m.size() != 2) throw ConfigError("mixture: means must be two-dimensional");
    const boost::math::normal unit;
    double mass = 1.0;
    for (double v : m) mass *= boost::math::cdf(unit, 1.0 - v) - boost::math::cdf(unit, -v);
    mass_.push_back(mass);
  }
}

std::optional<double> MixtureSampler::density(std::span<const double> x) const {
  if (!(x[0] >= 0.0 && x[0] <= 1.0 && x[1] >= 0.0 && x[1] <= 1.0)) return 0.0;
  double total = 0.0;
  for (std::size_t c = 0; c < means_.size(); ++c) {
    const double d0 = x[0] - means_[c][0];
    const double d1 = x[1] - means_[c][1];
    total += std::exp(-0.5 * (d0 * d0 + d1 * d1)) / (2.0 * std::numbers::pi * mass_[c]);
  }
  return total / static_cast<double>(means_.size());
}

std::size_t MixtureSampler::sample_component(Rng& rng, std::span<double> x) const {
  std::uniform_int_distribution<std::size_t> pick(0, means_.size() - 1);
  const std::size_t c = pick(rng);
  std::normal_distribution<double> z;
  // The component stays fixed; only the Gaussian draw is repeated.
  do {
    x[0] = means_[c][0] + z(rng);
    x[1] = means_[c][1] + z(rng);
  } while (!(x[0] >= 0.0 && x[0] <= 1.0 && x[1] >= 0.0 && x[1] <= 1.0));
  return c;
}

void MixtureSampler::sample_x(Rng& rng, std::span<double> x) const { sample_component(rng, x); }

double MixtureSampler::sample_y(std::span<const double> x, Rng& rng) const {
  std::normal_distribution<double> z;
  return regression_function(x) + noise_ * z(rng);
}

Dataset sample_design(const SimDesign& design, std::size_t n, Rng& rng,
                      std::vector<std::size_t>* components) {
  if (n < 1) throw ConfigError("sample_design: n must be at least 1");
  const MixtureSampler sampler(design);
  std::vector<double> x(2 * n);
  std::vector<double> y(n);
  if (components) components->assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    std::span<double> row(x.data() + 2 * i, 2);
    const std::size_t c = sampler.sample_component(rng, row);
    if (components) (*components)[i] = c;
    y[i] = sampler.sample_y(row, rng);
  }
  return Dataset(2, std::move(x), std::move(y));
}

}  // namespace honestrf::sim
