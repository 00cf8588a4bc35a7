// Acceptance suite: one PASS/FAIL line per criterion.
//   acceptance [--profile ci|full] [--only AC4,AC7] [--seed N] [--threads N]
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <fmt/format.h>

#include "CLI11.hpp"

#include "honestrf/cooccur/cooccur.hpp"
#include "honestrf/core/config.hpp"
#include "honestrf/core/dataset.hpp"
#include "honestrf/core/tree.hpp"
#include "honestrf/sim/coverage.hpp"
#include "honestrf/sim/design.hpp"
#include "honestrf/sim/experiment.hpp"
#include "honestrf/sim/sweep.hpp"
#include "honestrf/stability/stability.hpp"
#include "honestrf/ustat/forest.hpp"
#include "honestrf/ustat/hajek.hpp"
#include "honestrf/ustat/hoeffding.hpp"
#include "honestrf/ustat/trace.hpp"

using namespace honestrf;
using namespace honestrf::sim;

namespace {

struct Context {
  bool full = false;
  std::uint64_t seed = 1;
  std::size_t threads = 1;
};

struct Outcome {
  bool pass = false;
  std::string detail;
};

// Child-count bound and point conservation at every split.
std::size_t regularity_violations(const Tree& tree, double alpha) {
  std::size_t bad = 0;
  for (const auto& node : tree.nodes()) {
    if (!node.split) continue;
    const std::size_t need = min_child_count(alpha, node.point_count);
    const auto l = tree.nodes()[node.left].point_count;
    const auto r = tree.nodes()[node.right].point_count;
    if (l < need || r < need || l + r != node.point_count) ++bad;
  }
  return bad;
}

Outcome ac1(const Context& ctx) {
  Rng meta(derive_seed(ctx.seed, Stream::probe, 1));
  std::uniform_real_distribution<double> alpha_dist(0.005, 0.495);
  std::normal_distribution<double> z;
  const std::size_t ks[] = {1, 2, 5};
  std::size_t reg = 0, honest = 0, splits = 0;
  for (int t = 0; t < 500; ++t) {
    const std::size_t p = 1 + meta() % 3;
    ForestConfig cfg;
    cfg.s = 10 + meta() % 400;
    cfg.n = cfg.s;
    cfg.trees = 1;
    cfg.delta = uniform01(meta);
    cfg.alpha = alpha_dist(meta);
    cfg.k = ks[meta() % 3];
    cfg.grid_g = 5 + meta() % 100;
    const UniformSampler sampler(p, 0.3);
    Rng data_rng(meta());
    const Dataset data = draw_dataset(sampler, cfg.s, data_rng);
    std::vector<std::size_t> ids(cfg.s);
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
    const std::uint64_t seed = meta();
    const Tree tree = grow_tree(data, ids, cfg, seed);
    reg += regularity_violations(tree, cfg.alpha);
    for (const auto& n : tree.nodes()) splits += n.split.has_value();
    std::vector<double> y(data.size());
    for (auto& v : y) v = 10.0 * z(meta);
    if (!tree.same_structure(grow_tree(data.with_responses(y), ids, cfg, seed))) ++honest;
  }
  return {reg == 0 && honest == 0,
          fmt::format("500 trees, {} splits, regularity violations {}, honesty violations {}", splits, reg, honest)};
}

DiscreteSampler four_point_design() {
  const std::vector<Point> xs{{0.15, 0.2}, {0.7, 0.35}, {0.3, 0.8}, {0.85, 0.9}};
  const std::vector<double> px{0.1, 0.3, 0.4, 0.2};
  std::vector<DiscreteSampler::Atom> atoms;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double mean = 0.5 * (xs[i][0] + xs[i][1]);
    atoms.push_back({xs[i], mean - 0.1, 0.5 * px[i]});
    atoms.push_back({xs[i], mean + 0.25, 0.5 * px[i]});
  }
  return DiscreteSampler(2, atoms);
}

Outcome ac2(const Context& ctx) {
  const DiscreteSampler dist = four_point_design();
  ForestConfig cfg;
  cfg.n = cfg.s = 2;
  cfg.trees = 1;
  cfg.grid_g = 10;
  cfg.alpha = 0.1;
  cfg.delta = 0.5;
  const Kernel kernel = tree_kernel(cfg, {{0.3, 0.3}, {0.8, 0.7}});
  Eigen::MatrixXd m(2, 2);
  m << 2.0, 0.5, 0.5, 1.0;
  const HoeffdingReport exact = hoeffding_exact(kernel, dist, 2, m);
  HoeffdingMcOptions o;
  o.reps = 2000;
  o.inner = 100;
  o.seed = derive_seed(ctx.seed, Stream::probe, 2);
  o.threads = ctx.threads;
  const HoeffdingReport mc = hoeffding_check(kernel, dist, 2, m, o);
  const double gap = std::abs(mc.cross.at(0).value - exact.cross.at(0).value);
  const double se = mc.cross.at(0).stderr;
  const bool pass = exact.max_abs_cross() < 1e-10 && se > 0.0 && gap <= 4.0 * se;
  return {pass, fmt::format("exact max |<f1,f2>_M| = {:.2e}; MC {:.3e} vs exact {:.3e}, gap {:.2f} SE",
                            exact.max_abs_cross(), mc.cross[0].value, exact.cross[0].value,
                            se > 0 ? gap / se : INFINITY)};
}

Outcome ac3(const Context& ctx) {
  const MixtureSampler sampler(SimDesign{});
  const Point x{0.1, 0.1}, xb{0.35, 0.35};
  std::vector<CooccurEstimate> rows;
  std::string ms;
  for (std::size_t s : {128, 256, 512, 1024, 2048}) {
    ForestConfig cfg;
    cfg.n = cfg.s = s;
    cfg.trees = 2000;
    cfg.delta = 0.6;
    cfg.alpha = 0.01;
    cfg.k = 16;
    cfg.grid_g = 101;
    cfg.seed = derive_seed(ctx.seed, Stream::fresh, s);
    rows.push_back(estimate_m(sampler, x, xb, cfg, false, ctx.threads));
    ms += fmt::format(" {}:{}", s, rows.back().hits);
  }
  const PowerLawFit fit = decay_fit_counts(rows);
  return {fit.slope_upper < -1.0,
          fmt::format("k=16, hits per 2000 trees{}; slope {} (95% upper bound {:.2f})", ms,
                      fit.slope_unbounded_below ? std::string("-inf") : fmt::format("{:.2f}", fit.slope),
                      fit.slope_upper)};
}

Outcome ac4(const Context& ctx) {
  SimDesign d;
  d.forest.n = 10000;
  d.forest.s = 500;
  d.forest.delta = 0.5;
  d.forest.alpha = 0.01;
  d.forest.k = 1;
  d.forest.trees = ctx.full ? 5000 : 500;
  d.forest.grid_g = ctx.full ? 101 : 51;
  d.seed = derive_seed(ctx.seed, Stream::probe, 4);
  SweepOptions o;
  o.cells = d.forest.grid_g;
  o.threads = ctx.threads;
  const CorrelationCurve c = correlation_sweep(d, o);
  const auto viol = monotonicity_violations(c, 2.0);
  const double r2 = log_linear_r2(c, 0.4);
  const HeuristicComparison h = heuristic_compare(c, d.forest.s, 2, 0.0);
  const bool b0 = !c.rows.empty() && c.rows.front().distance == 0.0 && c.rows.front().correlation == 1.0;
  const bool cons = h.conservative_beyond(0.05);
  return {b0 && viol.empty() && r2 >= 0.9 && cons,
          fmt::format("B={} grid={}: bucket0 {}, rises beyond 2 SE {}, R^2 {:.3f}, lambda {:.1f}, "
                      "linear bound conservative beyond 0.05: {}",
                      d.forest.trees, d.forest.grid_g, b0 ? "= 1" : "!= 1", viol.size(), r2, h.lambda,
                      cons ? "yes" : "no")};
}

Outcome ac5(const Context& ctx) {
  const MixtureSampler sampler(SimDesign{});
  const std::vector<Point> pts{{0.3, 0.3}, {0.7, 0.7}};
  std::vector<double> ratios;
  std::string text;
  for (std::size_t s : {128, 512, 2048}) {
    ForestConfig cfg;
    cfg.s = s;
    cfg.n = s * s;
    cfg.trees = 1;
    cfg.delta = 0.5;
    cfg.alpha = 0.01;
    cfg.k = 1;
    cfg.grid_g = 101;
    cfg.seed = derive_seed(ctx.seed, Stream::anchor, s);
    HajekOptions h;
    h.anchors = 1000;
    h.mc_reps = 10;
    h.mode = HajekMode::paired;
    h.smooth_responses = true;
    h.focus_share = 0.5;
    h.focus_halfwidth = 1.5 / std::sqrt(static_cast<double>(s));
    h.split_anchor_response = true;
    h.threads = ctx.threads;
    const HajekEstimate est = hajek_variance(sampler, pts, cfg, h);
    ForestConfig kc = cfg;
    kc.seed = derive_seed(ctx.seed, Stream::tree, s);
    const Eigen::MatrixXd var_t = kernel_covariance(sampler, pts, kc, 1000, ctx.threads);
    const Eigen::MatrixXd ring = static_cast<double>(s) * est.var_t1_debiased();
    const TraceRatio tr = trace_ratio(var_t, ring, s, cfg.n);
    ratios.push_back(tr.value);
    text += fmt::format(" s={}: {:.4f}", s, tr.value);
  }
  bool dec = true;
  for (std::size_t i = 1; i < ratios.size(); ++i) dec = dec && ratios[i] < ratios[i - 1];
  return {dec, "trace ratio" + text};
}

Outcome ac6(const Context& ctx) {
  auto first = [](std::span<const double> x) { return x[0]; };
  const SplitRule separated =
      lipschitz_mean_rule({first}, {[](std::span<const double> mu) { return mu[0]; },
                                    [](std::span<const double>) { return 0.42; }});
  const SplitRule planted = argmax_first_rule();
  const Point x1{0.9, 0.1};
  auto classify = [&](const std::string& name, const SplitRule& rule, std::uint64_t idx) {
    std::vector<CouplingRun> runs;
    std::size_t i = 0;
    for (std::size_t m : {50, 100, 200, 400, 800}) {
      CouplingOptions o;
      o.reps = 20000;
      o.threads = ctx.threads;
      o.seed = derive_seed(derive_seed(ctx.seed, Stream::coupling, idx), Stream::coupling, i++);
      runs.push_back(coupled_split_tv(name, rule, NodeBox::unit(2), m, x1, o));
    }
    return std::pair{stability_classify(runs), runs};
  };
  const auto [vs, rs] = classify("lipschitz_separated", separated, 0);
  const auto [vp, rp] = classify("argmax_first", planted, 1);
  std::string tvs, tvp;
  for (const auto& r : rs) tvs += fmt::format(" {:.4f}", r.tv_hat);
  for (const auto& r : rp) tvp += fmt::format(" {:.3f}", r.tv_hat);
  return {vs.stable && !vp.stable,
          fmt::format("separated: {} (tv{}); argmax: {} (tv{}, delta_hat {:.2f})",
                      vs.stable ? "stable" : "unstable", tvs, vp.stable ? "stable" : "unstable", tvp,
                      vp.delta_hat)};
}

Outcome ac7(const Context& ctx) {
  SimDesign d;
  d.forest.n = 10000;
  d.forest.s = 500;
  d.forest.trees = 500;
  d.forest.delta = 0.5;
  d.forest.alpha = 0.01;
  d.forest.k = 1;
  d.forest.grid_g = 101;
  d.seed = derive_seed(ctx.seed, Stream::probe, 7);
  CoverageOptions o;
  o.trials = 200;
  o.hajek.anchors = 2000;
  o.hajek.mc_reps = 20;
  o.threads = ctx.threads;
  const auto contrasts = default_contrasts();
  const CoverageTable t = coverage_table(d, contrasts, o);
  bool pass = true;
  std::string text;
  for (std::size_t i = 0; i + 1 < t.rows.size(); i += 2) {
    const auto& diag = t.rows[i];
    const auto& heur = t.rows[i + 1];
    if (diag.l1_distance >= 1.0) pass = pass && diag.coverage >= 0.90;
    pass = pass && heur.coverage >= diag.coverage;
    text += fmt::format(" {} (L1 {:.1f}): diag {:.3f} heur {:.3f};", diag.contrast, diag.l1_distance,
                        diag.coverage, heur.coverage);
  }
  return {pass, "200 trials," + text};
}

std::map<std::string, std::string> run_files(const ExperimentConfig& base, std::size_t threads,
                                             const std::filesystem::path& dir) {
  ExperimentConfig c = base;
  c.threads = threads;
  std::filesystem::remove_all(dir);
  if (!run_experiment(c, c.experiments, dir)) throw std::runtime_error("experiment run failed in " + dir.string());
  std::map<std::string, std::string> out;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.path().extension() != ".csv") continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    out[e.path().filename().string()] = s.str();
  }
  return out;
}

Outcome ac8(const Context& ctx) {
  ExperimentConfig c = parse_config(R"({
    "n": 3000, "s": 100, "trees": 200, "grid_g": 51, "sweep_cells": 21,
    "experiments": ["simulate", "sweep", "coverage", "stability", "cooccur"],
    "trials": 100, "hajek_anchors": 60, "hajek_reps": 4,
    "stability_rules": ["lipschitz_separated", "argmax_first", "centroid"],
    "stability_m": [50, 100], "stability_reps": 2000,
    "cooccur_s": [64, 128, 256], "cooccur_trees": 200
  })", "<ac8>");
  c.design.seed = ctx.seed;
  const auto root = std::filesystem::temp_directory_path() / fmt::format("honestrf_ac8_{}", ctx.seed);
  const auto a = run_files(c, 1, root / "t1");
  std::string mismatched;
  std::size_t compared = 0;
  for (std::size_t threads : {2, 5}) {
    const auto b = run_files(c, threads, root / fmt::format("t{}", threads));
    if (b.size() != a.size()) mismatched += fmt::format(" file-count@{}", threads);
    for (const auto& [name, bytes] : a) {
      ++compared;
      const auto it = b.find(name);
      if (it == b.end() || it->second != bytes) mismatched += fmt::format(" {}@{}", name, threads);
    }
  }
  std::filesystem::remove_all(root);
  return {mismatched.empty() && a.size() == 7,
          fmt::format("{} CSV files, {} comparisons against 1 thread; mismatches:{}", a.size(), compared,
                      mismatched.empty() ? " none" : mismatched)};
}

struct Criterion {
  std::string id;
  std::string title;
  double limit_seconds;  // runtime bound stated for the criterion
  std::function<Outcome(const Context&)> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::string profile = "ci";
  std::string only;
  Context ctx;
  ctx.threads = std::max(1u, std::thread::hardware_concurrency());
  app.add_option("--profile", profile)->check(CLI::IsMember({"ci", "full"}));
  app.add_option("--only", only, "comma separated ids, e.g. AC4,AC7");
  app.add_option("--seed", ctx.seed);
  app.add_option("--threads", ctx.threads)->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);
  ctx.full = profile == "full";

  const std::vector<Criterion> all{
      {"AC1", "regularity and honesty", 60, ac1},
      {"AC2", "Hoeffding orthogonality", 60, ac2},
      {"AC3", "co-occurrence decay", 600, ac3},
      {"AC4", "correlation decay", ctx.full ? 1800.0 : 180.0, ac4},
      {"AC5", "trace-ratio decay", 900, ac5},
      {"AC6", "stability classification", 300, ac6},
      {"AC7", "contrast coverage", 1200, ac7},
      {"AC8", "thread-count determinism", 1e9, ac8},
  };
  std::set<std::string> wanted;
  std::stringstream ss(only);
  for (std::string id; std::getline(ss, id, ',');) wanted.insert(id);

  std::printf("profile %s, seed %llu, threads %zu\n", profile.c_str(),
              static_cast<unsigned long long>(ctx.seed), ctx.threads);
  int failures = 0;
  for (const auto& c : all) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome r;
    try {
      r = c.run(ctx);
    } catch (const std::exception& e) {
      r = {false, std::string("error: ") + e.what()};
    }
    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = dt < c.limit_seconds;
    const bool pass = r.pass && in_time;
    failures += !pass;
    std::printf("%s %s  %s: %s [%.1f s%s]\n", c.id.c_str(), pass ? "PASS" : "FAIL", c.title.c_str(),
                r.detail.c_str(), dt, in_time ? "" : fmt::format(", over {:.0f} s limit", c.limit_seconds).c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
