#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "honestrf/core/config.hpp"
#include "honestrf/core/dataset.hpp"

namespace honestrf::sim {

/// Four-component Gaussian mixture on the unit square, each component with
/// identity covariance and conditioned on landing in [0,1]^2. The response is
/// the coordinate mean plus Gaussian noise.
struct SimDesign {
  std::vector<Point> means{{0.3, 0.3}, {0.3, 0.7}, {0.7, 0.3}, {0.7, 0.7}};
  double noise = 0.2;
  ForestConfig forest;
  std::uint64_t seed = 0;

  void validate() const;
};

class MixtureSampler final : public Sampler {
 public:
  MixtureSampler(std::vector<Point> means, double noise);
  explicit MixtureSampler(const SimDesign& design) : MixtureSampler(design.means, design.noise) {}

  std::size_t dim() const override { return 2; }
  void sample_x(Rng& rng, std::span<double> x) const override;
  double sample_y(std::span<const double> x, Rng& rng) const override;
  std::optional<double> regression(std::span<const double> x) const override {
    return regression_function(x);
  }
  std::optional<double> density(std::span<const double> x) const override;
  std::optional<double> conditional_variance(std::span<const double>) const override {
    return noise_ * noise_;
  }

  /// Draws x and returns the index of the chosen component.
  std::size_t sample_component(Rng& rng, std::span<double> x) const;

  static double regression_function(std::span<const double> x) { return 0.5 * (x[0] + x[1]); }

 private:
  std::vector<Point> means_;
  double noise_;
  std::vector<double> mass_;  // probability each component's Gaussian lands in the square
};

/// n draws from the design; `components`, when given, receives the labels.
Dataset sample_design(const SimDesign& design, std::size_t n, Rng& rng,
                      std::vector<std::size_t>* components = nullptr);

}  // namespace honestrf::sim
