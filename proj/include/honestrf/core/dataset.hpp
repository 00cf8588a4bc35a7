#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "honestrf/core/rng.hpp"

namespace honestrf {

using Point = std::vector<double>;

/// Immutable sample (X_i, Y_i), i = 1..n, with covariates in [0, 1]^p stored
/// row-major.
class Dataset {
 public:
  Dataset(std::size_t p, std::vector<double> x, std::vector<double> y);

  std::size_t size() const noexcept { return y_.size(); }
  std::size_t dim() const noexcept { return p_; }

  std::span<const double> row(std::size_t i) const noexcept {
    return {x_.data() + i * p_, p_};
  }
  double x(std::size_t i, std::size_t j) const noexcept { return x_[i * p_ + j]; }
  double y(std::size_t i) const noexcept { return y_[i]; }

  std::span<const double> xs() const noexcept { return x_; }
  std::span<const double> ys() const noexcept { return y_; }

  /// Same covariates, responses replaced. Used to probe honesty.
  Dataset with_responses(std::vector<double> y) const;

 private:
  std::size_t p_;
  std::vector<double> x_;
  std::vector<double> y_;
};

/// Generative distribution of (X, Y). Implementations must be stateless so a
/// single instance can be shared across worker threads.
class Sampler {
 public:
  virtual ~Sampler() = default;

  virtual std::size_t dim() const = 0;
  virtual void sample_x(Rng& rng, std::span<double> x) const = 0;
  virtual double sample_y(std::span<const double> x, Rng& rng) const = 0;

  /// Joint draw of one observation; x receives the covariates.
  virtual double sample(Rng& rng, std::span<double> x) const {
    sample_x(rng, x);
    return sample_y(x, rng);
  }

  /// E[Y | X = x] when the model knows it in closed form.
  virtual std::optional<double> regression(std::span<const double> /*x*/) const {
    return std::nullopt;
  }

  /// Var[Y | X = x] when known in closed form.
  virtual std::optional<double> conditional_variance(std::span<const double> /*x*/) const {
    return std::nullopt;
  }

  /// Lebesgue density of X at x, for continuous models that know it.
  virtual std::optional<double> density(std::span<const double> /*x*/) const {
    return std::nullopt;
  }
};

/// n i.i.d. draws from the sampler.
Dataset draw_dataset(const Sampler& sampler, std::size_t n, Rng& rng);

/// n draws where the covariates of observation 0 are pinned to `first`.
Dataset draw_dataset_with_first(const Sampler& sampler, std::size_t n,
                                std::span<const double> first, Rng& rng);

/// X uniform on [0,1]^p, Y = mean(x) + noise * N(0,1).
class UniformSampler final : public Sampler {
 public:
  explicit UniformSampler(std::size_t p, double noise = 0.0);

  std::size_t dim() const override { return p_; }
  void sample_x(Rng& rng, std::span<double> x) const override;
  double sample_y(std::span<const double> x, Rng& rng) const override;
  std::optional<double> regression(std::span<const double> x) const override;
  std::optional<double> density(std::span<const double> x) const override;
  std::optional<double> conditional_variance(std::span<const double>) const override {
    return noise_ * noise_;
  }

 private:
  std::size_t p_;
  double noise_;
};

/// Finite-support distribution of Z = (X, Y).
class DiscreteSampler final : public Sampler {
 public:
  struct Atom {
    Point x;
    double y = 0.0;
    double prob = 0.0;
  };

  DiscreteSampler(std::size_t p, std::vector<Atom> atoms);

  std::size_t dim() const override { return p_; }
  const std::vector<Atom>& atoms() const noexcept { return atoms_; }

  std::size_t sample_index(Rng& rng) const;
  void sample_x(Rng& rng, std::span<double> x) const override;
  /// Y drawn from the atoms sharing these covariates.
  double sample_y(std::span<const double> x, Rng& rng) const override;
  double sample(Rng& rng, std::span<double> x) const override;
  std::optional<double> regression(std::span<const double> x) const override;

 private:
  std::size_t p_;
  std::vector<Atom> atoms_;
  std::vector<double> cumulative_;
};

}  // namespace honestrf
