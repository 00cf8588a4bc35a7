#include "honestrf/ustat/hoeffding.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "honestrf/core/errors.hpp"
#include "honestrf/core/numeric.hpp"
#include "honestrf/core/parallel.hpp"
#include "honestrf/core/tree.hpp"

namespace honestrf {

namespace {

void check_arity(int arity) {
  if (arity != 2 && arity != 3) throw ConfigError("hoeffding: kernel arity must be 2 or 3");
}

void check_metric(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols() || m.rows() == 0) throw ConfigError("hoeffding: metric must be square");
  if (!m.isApprox(m.transpose(), 1e-12)) throw ConfigError("hoeffding: metric must be symmetric");
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) throw ConfigError("hoeffding: metric must be positive definite");
}

double inner(const Eigen::VectorXd& a, const Eigen::MatrixXd& m, const Eigen::VectorXd& b) {
  return a.dot(m * b);
}

Observation draw_observation(const Sampler& sampler, Rng& rng) {
  Observation o;
  o.x.resize(sampler.dim());
  o.y = sampler.sample(rng, o.x);
  return o;
}

struct RunningMean {
  std::vector<CompensatedSum> sums;
  std::size_t count = 0;

  void add(const Eigen::VectorXd& v) {
    if (sums.empty()) sums.resize(static_cast<std::size_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) sums[static_cast<std::size_t>(i)].add(v(i));
    ++count;
  }
  Eigen::VectorXd value() const {
    Eigen::VectorXd out(static_cast<Eigen::Index>(sums.size()));
    for (std::size_t i = 0; i < sums.size(); ++i) {
      out(static_cast<Eigen::Index>(i)) = sums[i].value() / static_cast<double>(count);
    }
    return out;
  }
};

// E[f | leading arguments fixed] by averaging over fresh trailing arguments.
Eigen::VectorXd conditional_mean(const Kernel& kernel, const Sampler& sampler, int arity,
                                 std::span<const Observation> fixed, std::size_t draws, Rng& rng) {
  std::vector<Observation> args(fixed.begin(), fixed.end());
  args.resize(static_cast<std::size_t>(arity));
  RunningMean acc;
  for (std::size_t d = 0; d < draws; ++d) {
    for (std::size_t i = fixed.size(); i < args.size(); ++i) args[i] = draw_observation(sampler, rng);
    acc.add(kernel(args));
  }
  return acc.value();
}

struct McSample {
  std::array<double, 3> cross{};   // (1,2), (1,3), (2,3)
  std::array<double, 3> energy{};
  double residual = 0.0;
};

}  // namespace

double HoeffdingReport::max_abs_cross() const {
  double out = 0.0;
  for (const auto& c : cross) out = std::max(out, std::abs(c.value));
  return out;
}

Kernel tree_kernel(const ForestConfig& cfg, std::vector<Point> queries) {
  return [cfg, queries = std::move(queries)](std::span<const Observation> obs) {
    const std::size_t p = obs.front().x.size();
    std::vector<double> x;
    std::vector<double> y;
    x.reserve(obs.size() * p);
    for (const auto& o : obs) {
      x.insert(x.end(), o.x.begin(), o.x.end());
      y.push_back(o.y);
    }
    const Dataset data(p, std::move(x), std::move(y));
    std::vector<std::size_t> ids(obs.size());
    std::iota(ids.begin(), ids.end(), 0);
    const auto pred = expected_prediction(data, ids, cfg, queries);
    return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(pred.data(),
                                                             static_cast<Eigen::Index>(pred.size())));
  };
}

ExactDecomposition hoeffding_decompose_exact(const Kernel& kernel, const DiscreteSampler& dist,
                                             int arity) {
  check_arity(arity);
  const auto& atoms = dist.atoms();
  const std::size_t K = atoms.size();
  std::vector<Observation> obs(K);
  for (std::size_t a = 0; a < K; ++a) obs[a] = Observation{atoms[a].x, atoms[a].y};
  auto prob = [&](std::size_t a) { return atoms[a].prob; };

  ExactDecomposition dec;
  std::vector<Eigen::VectorXd> f;
  if (arity == 2) {
    f.resize(K * K);
    for (std::size_t a = 0; a < K; ++a) {
      for (std::size_t b = 0; b < K; ++b) {
        const std::array<Observation, 2> args{obs[a], obs[b]};
        f[a * K + b] = kernel(args);
      }
    }
  } else {
    f.resize(K * K * K);
    for (std::size_t a = 0; a < K; ++a) {
      for (std::size_t b = 0; b < K; ++b) {
        for (std::size_t c = 0; c < K; ++c) {
          const std::array<Observation, 3> args{obs[a], obs[b], obs[c]};
          f[(a * K + b) * K + c] = kernel(args);
        }
      }
    }
  }
  const Eigen::Index q = f.front().size();
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(q);

  dec.mean = zero;
  dec.f1.assign(K, zero);
  dec.f2.assign(K * K, zero);
  if (arity == 2) {
    for (std::size_t a = 0; a < K; ++a) {
      for (std::size_t b = 0; b < K; ++b) {
        dec.mean += prob(a) * prob(b) * f[a * K + b];
        dec.f1[a] += prob(b) * f[a * K + b];
      }
    }
    for (auto& v : dec.f1) v -= dec.mean;
    for (std::size_t a = 0; a < K; ++a) {
      for (std::size_t b = 0; b < K; ++b) {
        dec.f2[a * K + b] = f[a * K + b] - dec.f1[a] - dec.f1[b] - dec.mean;
      }
    }
    return dec;
  }

  std::vector<Eigen::VectorXd> pair_mean(K * K, zero);
  for (std::size_t a = 0; a < K; ++a) {
    for (std::size_t b = 0; b < K; ++b) {
      for (std::size_t c = 0; c < K; ++c) {
        const auto& v = f[(a * K + b) * K + c];
        pair_mean[a * K + b] += prob(c) * v;
        dec.f1[a] += prob(b) * prob(c) * v;
        dec.mean += prob(a) * prob(b) * prob(c) * v;
      }
    }
  }
  for (auto& v : dec.f1) v -= dec.mean;
  for (std::size_t a = 0; a < K; ++a) {
    for (std::size_t b = 0; b < K; ++b) {
      dec.f2[a * K + b] = pair_mean[a * K + b] - dec.f1[a] - dec.f1[b] - dec.mean;
    }
  }
  dec.f3.assign(K * K * K, zero);
  for (std::size_t a = 0; a < K; ++a) {
    for (std::size_t b = 0; b < K; ++b) {
      for (std::size_t c = 0; c < K; ++c) {
        dec.f3[(a * K + b) * K + c] = f[(a * K + b) * K + c] - dec.f2[a * K + b] -
                                      dec.f2[a * K + c] - dec.f2[b * K + c] - dec.f1[a] -
                                      dec.f1[b] - dec.f1[c] - dec.mean;
      }
    }
  }
  return dec;
}

HoeffdingReport hoeffding_exact(const Kernel& kernel, const DiscreteSampler& dist, int arity,
                                const Eigen::MatrixXd& metric) {
  check_metric(metric);
  const ExactDecomposition dec = hoeffding_decompose_exact(kernel, dist, arity);
  if (dec.mean.size() != metric.rows()) throw ConfigError("hoeffding: metric size differs from kernel");
  const auto& atoms = dist.atoms();
  const std::size_t K = atoms.size();
  auto prob = [&](std::size_t a) { return atoms[a].prob; };

  HoeffdingReport rep;
  rep.arity = arity;
  rep.mean = dec.mean;
  CompensatedSum c12, c13, c23, e1, e2, e3;
  Eigen::VectorXd m1 = Eigen::VectorXd::Zero(dec.mean.size());
  Eigen::VectorXd m2 = m1;
  Eigen::VectorXd m3 = m1;
  for (std::size_t a = 0; a < K; ++a) {
    e1.add(prob(a) * inner(dec.f1[a], metric, dec.f1[a]));
    m1 += prob(a) * dec.f1[a];
    for (std::size_t b = 0; b < K; ++b) {
      const double pab = prob(a) * prob(b);
      const auto& f2 = dec.f2[a * K + b];
      c12.add(pab * inner(dec.f1[a], metric, f2));
      e2.add(pab * inner(f2, metric, f2));
      m2 += pab * f2;
      if (arity == 3) {
        for (std::size_t c = 0; c < K; ++c) {
          const double pabc = pab * prob(c);
          const auto& f3 = dec.f3[(a * K + b) * K + c];
          c13.add(pabc * inner(dec.f1[a], metric, f3));
          c23.add(pabc * inner(f2, metric, f3));
          e3.add(pabc * inner(f3, metric, f3));
          m3 += pabc * f3;
        }
      }
    }
  }
  rep.cross.push_back({1, 2, c12.value(), 0.0});
  rep.component_energy = {e1.value(), e2.value()};
  rep.max_component_mean = std::max(m1.cwiseAbs().maxCoeff(), m2.cwiseAbs().maxCoeff());
  if (arity == 3) {
    rep.cross.push_back({1, 3, c13.value(), 0.0});
    rep.cross.push_back({2, 3, c23.value(), 0.0});
    rep.component_energy.push_back(e3.value());
    rep.max_component_mean = std::max(rep.max_component_mean, m3.cwiseAbs().maxCoeff());
  }

  // Rebuild f from its components on the whole support.
  double residual = 0.0;
  std::vector<Observation> obs(K);
  for (std::size_t a = 0; a < K; ++a) obs[a] = Observation{atoms[a].x, atoms[a].y};
  for (std::size_t a = 0; a < K; ++a) {
    for (std::size_t b = 0; b < K; ++b) {
      if (arity == 2) {
        const std::array<Observation, 2> args{obs[a], obs[b]};
        const Eigen::VectorXd recon = dec.mean + dec.f1[a] + dec.f1[b] + dec.f2[a * K + b];
        residual = std::max(residual, (kernel(args) - recon).cwiseAbs().maxCoeff());
        continue;
      }
      for (std::size_t c = 0; c < K; ++c) {
        const std::array<Observation, 3> args{obs[a], obs[b], obs[c]};
        const Eigen::VectorXd recon = dec.mean + dec.f1[a] + dec.f1[b] + dec.f1[c] +
                                      dec.f2[a * K + b] + dec.f2[a * K + c] + dec.f2[b * K + c] +
                                      dec.f3[(a * K + b) * K + c];
        residual = std::max(residual, (kernel(args) - recon).cwiseAbs().maxCoeff());
      }
    }
  }
  rep.residual = residual;
  rep.reps = K;
  return rep;
}

Eigen::VectorXd estimate_f1(const Kernel& kernel, const Sampler& sampler, int arity,
                            const Observation& z, const Eigen::VectorXd& mean, std::size_t draws,
                            Rng& rng) {
  check_arity(arity);
  const std::array<Observation, 1> fixed{z};
  return conditional_mean(kernel, sampler, arity, fixed, draws, rng) - mean;
}

HoeffdingReport hoeffding_check(const Kernel& kernel, const Sampler& sampler, int arity,
                                const Eigen::MatrixXd& metric, const HoeffdingMcOptions& opts) {
  check_arity(arity);
  check_metric(metric);
  if (opts.reps < 2 || opts.inner < 1) throw ConfigError("hoeffding: need reps >= 2 and inner >= 1");

  // E f from its own pool of draws.
  Rng mean_rng = make_rng(opts.seed, Stream::probe, 0);
  RunningMean mean_acc;
  {
    std::vector<Observation> args(static_cast<std::size_t>(arity));
    for (std::size_t d = 0; d < opts.reps; ++d) {
      for (auto& a : args) a = draw_observation(sampler, mean_rng);
      mean_acc.add(kernel(args));
    }
  }
  const Eigen::VectorXd mean = mean_acc.value();
  if (mean.size() != metric.rows()) throw ConfigError("hoeffding: metric size differs from kernel");

  std::vector<McSample> samples(opts.reps);
  parallel_for(opts.reps, opts.threads, [&](std::size_t r) {
    Rng rng = make_rng(opts.seed, Stream::coupling, r);
    std::vector<Observation> z(static_cast<std::size_t>(arity));
    for (auto& o : z) o = draw_observation(sampler, rng);
    const Eigen::VectorXd fz = kernel(z);

    // Independent estimate sets: A feeds the left factor of each product, B
    // builds the components it is paired with, C gives an independent f2.
    auto g1 = [&](const Observation& o) {
      const std::array<Observation, 1> fixed{o};
      return Eigen::VectorXd(conditional_mean(kernel, sampler, arity, fixed, opts.inner, rng) - mean);
    };
    auto g2 = [&](const Observation& a, const Observation& b, const Eigen::VectorXd& ga,
                  const Eigen::VectorXd& gb) {
      const std::array<Observation, 2> fixed{a, b};
      return Eigen::VectorXd(conditional_mean(kernel, sampler, arity, fixed, opts.inner, rng) - ga -
                             gb - mean);
    };

    McSample out;
    const Eigen::VectorXd f1_a = g1(z[0]);
    std::vector<Eigen::VectorXd> gb;
    for (const auto& o : z) gb.push_back(g1(o));
    if (arity == 2) {
      const Eigen::VectorXd f2 = fz - gb[0] - gb[1] - mean;
      out.cross[0] = inner(f1_a, metric, f2);
      out.energy[0] = inner(f1_a, metric, gb[0]);
      const Eigen::VectorXd recon = mean + gb[0] + gb[1] + f2;
      out.residual = (fz - recon).cwiseAbs().maxCoeff();
      samples[r] = out;
      return;
    }
    const Eigen::VectorXd g2_01 = g2(z[0], z[1], gb[0], gb[1]);
    const Eigen::VectorXd g2_02 = g2(z[0], z[2], gb[0], gb[2]);
    const Eigen::VectorXd g2_12 = g2(z[1], z[2], gb[1], gb[2]);
    const Eigen::VectorXd f3 = fz - g2_01 - g2_02 - g2_12 - gb[0] - gb[1] - gb[2] - mean;
    const Eigen::VectorXd c0 = g1(z[0]);
    const Eigen::VectorXd c1 = g1(z[1]);
    const Eigen::VectorXd f2_c = g2(z[0], z[1], c0, c1);
    out.cross[0] = inner(f1_a, metric, g2_01);
    out.cross[1] = inner(f1_a, metric, f3);
    out.cross[2] = inner(f2_c, metric, f3);
    out.energy[0] = inner(f1_a, metric, gb[0]);
    out.energy[1] = inner(f2_c, metric, g2_01);
    out.energy[2] = inner(f3, metric, f3);
    const Eigen::VectorXd recon =
        mean + gb[0] + gb[1] + gb[2] + g2_01 + g2_02 + g2_12 + f3;
    out.residual = (fz - recon).cwiseAbs().maxCoeff();
    samples[r] = out;
  });

  HoeffdingReport rep;
  rep.arity = arity;
  rep.mean = mean;
  rep.reps = opts.reps;
  const std::array<std::pair<int, int>, 3> orders{{{1, 2}, {1, 3}, {2, 3}}};
  const std::size_t n_cross = arity == 2 ? 1 : 3;
  const auto R = static_cast<double>(opts.reps);
  for (std::size_t c = 0; c < n_cross; ++c) {
    std::vector<double> vals(opts.reps);
    for (std::size_t r = 0; r < opts.reps; ++r) vals[r] = samples[r].cross[c];
    const double m = compensated_mean(vals);
    CompensatedSum ss;
    for (double v : vals) ss.add((v - m) * (v - m));
    const double se = std::sqrt(ss.value() / (R - 1.0) / R);
    rep.cross.push_back({orders[c].first, orders[c].second, m, se});
  }
  for (std::size_t k = 0; k < static_cast<std::size_t>(arity); ++k) {
    std::vector<double> vals(opts.reps);
    for (std::size_t r = 0; r < opts.reps; ++r) vals[r] = samples[r].energy[k];
    rep.component_energy.push_back(compensated_mean(vals));
  }
  for (const auto& s : samples) rep.residual = std::max(rep.residual, s.residual);
  return rep;
}

}  // namespace honestrf
