#include "honestrf/core/dataset.hpp"

#include <algorithm>
#include <cmath>

#include "honestrf/core/errors.hpp"

namespace honestrf {

Dataset::Dataset(std::size_t p, std::vector<double> x, std::vector<double> y)
    : p_(p), x_(std::move(x)), y_(std::move(y)) {
  if (p_ < 1) throw ConfigError("dataset: feature dimension must be at least 1");
  if (y_.empty()) throw ConfigError("dataset: at least one observation is required");
  if (x_.size() != y_.size() * p_) {
    throw ConfigError("dataset: covariate matrix does not have n * p entries");
  }
  for (double v : x_) {
    if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("dataset: covariates must lie in [0, 1]");
  }
  for (double v : y_) {
    if (!std::isfinite(v)) throw ConfigError("dataset: responses must be finite");
  }
}

Dataset Dataset::with_responses(std::vector<double> y) const {
  return Dataset(p_, x_, std::move(y));
}

Dataset draw_dataset(const Sampler& sampler, std::size_t n, Rng& rng) {
  const std::size_t p = sampler.dim();
  std::vector<double> x(n * p);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = sampler.sample(rng, std::span<double>(x.data() + i * p, p));
  }
  return Dataset(p, std::move(x), std::move(y));
}

Dataset draw_dataset_with_first(const Sampler& sampler, std::size_t n,
                                std::span<const double> first, Rng& rng) {
  const std::size_t p = sampler.dim();
  if (first.size() != p) throw ConfigError("pinned point has the wrong dimension");
  if (n == 0) throw ConfigError("dataset: at least one observation is required");
  std::vector<double> x(n * p);
  std::vector<double> y(n);
  std::copy(first.begin(), first.end(), x.begin());
  y[0] = sampler.sample_y(first, rng);
  for (std::size_t i = 1; i < n; ++i) {
    y[i] = sampler.sample(rng, std::span<double>(x.data() + i * p, p));
  }
  return Dataset(p, std::move(x), std::move(y));
}

UniformSampler::UniformSampler(std::size_t p, double noise) : p_(p), noise_(noise) {
  if (p_ < 1) throw ConfigError("uniform sampler: dimension must be at least 1");
  if (noise_ < 0.0) throw ConfigError("uniform sampler: noise must be nonnegative");
}

void UniformSampler::sample_x(Rng& rng, std::span<double> x) const {
  for (auto& v : x) v = uniform01(rng);
}

std::optional<double> UniformSampler::density(std::span<const double> x) const {
  for (double v : x) {
    if (!(v >= 0.0 && v <= 1.0)) return 0.0;
  }
  return 1.0;
}

std::optional<double> UniformSampler::regression(std::span<const double> x) const {
  double m = 0.0;
  for (double v : x) m += v;
  return m / static_cast<double>(x.size());
}

double UniformSampler::sample_y(std::span<const double> x, Rng& rng) const {
  const double m = *regression(x);
  if (noise_ == 0.0) return m;
  std::normal_distribution<double> z;
  return m + noise_ * z(rng);
}

DiscreteSampler::DiscreteSampler(std::size_t p, std::vector<Atom> atoms)
    : p_(p), atoms_(std::move(atoms)) {
  if (atoms_.empty()) throw ConfigError("discrete sampler: no atoms");
  double total = 0.0;
  for (const auto& a : atoms_) {
    if (a.x.size() != p_) throw ConfigError("discrete sampler: atom has wrong dimension");
    if (!(a.prob > 0.0)) throw ConfigError("discrete sampler: probabilities must be positive");
    total += a.prob;
    cumulative_.push_back(total);
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("discrete sampler: probabilities must sum to 1");
}

std::size_t DiscreteSampler::sample_index(Rng& rng) const {
  const double u = uniform01(rng) * cumulative_.back();
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
  return std::min<std::size_t>(static_cast<std::size_t>(it - cumulative_.begin()),
                               atoms_.size() - 1);
}

void DiscreteSampler::sample_x(Rng& rng, std::span<double> x) const {
  const auto& a = atoms_[sample_index(rng)];
  std::copy(a.x.begin(), a.x.end(), x.begin());
}

double DiscreteSampler::sample_y(std::span<const double> x, Rng& rng) const {
  double mass = 0.0;
  for (const auto& a : atoms_) {
    if (std::equal(a.x.begin(), a.x.end(), x.begin())) mass += a.prob;
  }
  if (mass == 0.0) throw ConfigError("discrete sampler: covariates outside the support");
  double u = uniform01(rng) * mass;
  double last = 0.0;
  for (const auto& a : atoms_) {
    if (!std::equal(a.x.begin(), a.x.end(), x.begin())) continue;
    last = a.y;
    u -= a.prob;
    if (u < 0.0) return a.y;
  }
  return last;
}

std::optional<double> DiscreteSampler::regression(std::span<const double> x) const {
  double mass = 0.0;
  double total = 0.0;
  for (const auto& a : atoms_) {
    if (!std::equal(a.x.begin(), a.x.end(), x.begin())) continue;
    mass += a.prob;
    total += a.prob * a.y;
  }
  if (mass == 0.0) return std::nullopt;
  return total / mass;
}

double DiscreteSampler::sample(Rng& rng, std::span<double> x) const {
  const auto& a = atoms_[sample_index(rng)];
  std::copy(a.x.begin(), a.x.end(), x.begin());
  return a.y;
}

}  // namespace honestrf
