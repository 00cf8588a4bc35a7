#include "honestrf/sim/experiment.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include <Eigen/Core>
#include <boost/version.hpp>
#include <fmt/format.h>

#include "honestrf/cooccur/cooccur.hpp"
#include "honestrf/core/csv.hpp"
#include "honestrf/core/errors.hpp"
#include "honestrf/stability/stability.hpp"
#include "honestrf/ustat/forest.hpp"
#include "honestrf/ustat/serialize.hpp"

namespace honestrf::sim {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

// Invalid value attributable to one key.
struct KeyError : ConfigError {
  KeyError(std::string k, const std::string& msg) : ConfigError(msg), key(std::move(k)) {}
  std::string key;
};

[[noreturn]] void bad(const std::string& key, const std::string& msg) {
  throw KeyError(key, key + ": " + msg);
}

// Line of each top-level key in a JSON object text.
std::map<std::string, std::size_t> key_lines(std::string_view text) {
  std::map<std::string, std::size_t> out;
  std::size_t line = 1;
  int depth = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '\n') {
      ++line;
    } else if (c == '{' || c == '[') {
      ++depth;
    } else if (c == '}' || c == ']') {
      --depth;
    } else if (c == '"') {
      const std::size_t start_line = line;
      std::string s;
      for (++i; i < text.size() && text[i] != '"'; ++i) {
        if (text[i] == '\\' && i + 1 < text.size()) ++i;
        if (text[i] == '\n') ++line;
        s.push_back(text[i]);
      }
      std::size_t j = i + 1;
      while (j < text.size() && (text[j] == ' ' || text[j] == '\t' || text[j] == '\r' || text[j] == '\n')) ++j;
      if (depth == 1 && j < text.size() && text[j] == ':' && !out.count(s)) out[s] = start_line;
    }
  }
  return out;
}

std::size_t line_of_offset(std::string_view text, std::size_t offset) {
  std::size_t line = 1;
  for (std::size_t i = 0; i < std::min(offset, text.size()); ++i) line += text[i] == '\n';
  return line;
}

Point get_point(const std::string& key, const json& v) {
  if (!v.is_array() || v.size() != 2) bad(key, "expected a two-element array of numbers");
  Point p;
  for (const auto& e : v) {
    if (!e.is_number()) bad(key, "expected a two-element array of numbers");
    p.push_back(e.get<double>());
  }
  return p;
}

std::vector<Point> get_points(const std::string& key, const json& v) {
  if (!v.is_array()) bad(key, "expected an array of points");
  std::vector<Point> out;
  for (const auto& e : v) out.push_back(get_point(key, e));
  return out;
}

double get_number(const std::string& key, const json& v) {
  if (!v.is_number()) bad(key, "expected a number");
  return v.get<double>();
}

std::size_t get_count(const std::string& key, const json& v) {
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0) bad(key, "expected a non-negative integer");
  return v.get<std::size_t>();
}

std::uint64_t get_u64(const std::string& key, const json& v) {
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
    bad(key, "expected an unsigned 64-bit integer");
  }
  return v.get<std::uint64_t>();
}

bool get_bool(const std::string& key, const json& v) {
  if (!v.is_boolean()) bad(key, "expected true or false");
  return v.get<bool>();
}

std::vector<std::size_t> get_counts(const std::string& key, const json& v) {
  if (!v.is_array() || v.empty()) bad(key, "expected a non-empty array of integers");
  std::vector<std::size_t> out;
  for (const auto& e : v) out.push_back(get_count(key, e));
  return out;
}

std::vector<std::string> get_strings(const std::string& key, const json& v) {
  if (!v.is_array()) bad(key, "expected an array of strings");
  std::vector<std::string> out;
  for (const auto& e : v) {
    if (!e.is_string()) bad(key, "expected an array of strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

std::string contrast_name(const Point& x, const Point& xb) {
  return fmt::format("({} {})-({} {})", format_number(x[0]), format_number(x[1]),
                     format_number(xb[0]), format_number(xb[1]));
}

using Setter = std::function<void(ExperimentConfig&, const std::string&, const json&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"n", [](auto& c, auto& k, auto& v) { c.design.forest.n = get_count(k, v); }},
      {"s", [](auto& c, auto& k, auto& v) { c.design.forest.s = get_count(k, v); }},
      {"trees", [](auto& c, auto& k, auto& v) { c.design.forest.trees = get_count(k, v); }},
      {"delta", [](auto& c, auto& k, auto& v) { c.design.forest.delta = get_number(k, v); }},
      {"alpha", [](auto& c, auto& k, auto& v) { c.design.forest.alpha = get_number(k, v); }},
      {"k", [](auto& c, auto& k, auto& v) { c.design.forest.k = get_count(k, v); }},
      {"grid_g", [](auto& c, auto& k, auto& v) { c.design.forest.grid_g = get_count(k, v); }},
      {"seed", [](auto& c, auto& k, auto& v) { c.design.seed = get_u64(k, v); }},
      {"noise", [](auto& c, auto& k, auto& v) { c.design.noise = get_number(k, v); }},
      {"means", [](auto& c, auto& k, auto& v) { c.design.means = get_points(k, v); }},
      {"experiments", [](auto& c, auto& k, auto& v) { c.experiments = get_strings(k, v); }},
      {"threads", [](auto& c, auto& k, auto& v) { c.threads = get_count(k, v); }},
      {"queries", [](auto& c, auto& k, auto& v) { c.queries = get_points(k, v); }},
      {"sweep_references", [](auto& c, auto& k, auto& v) { c.sweep.references = get_points(k, v); }},
      {"sweep_cells", [](auto& c, auto& k, auto& v) { c.sweep.cells = get_count(k, v); }},
      {"bucket_width", [](auto& c, auto& k, auto& v) { c.sweep.bucket_width = get_number(k, v); }},
      {"snap_references", [](auto& c, auto& k, auto& v) { c.sweep.snap_references = get_bool(k, v); }},
      {"eps", [](auto& c, auto& k, auto& v) { c.eps = get_number(k, v); }},
      {"r2_max_distance", [](auto& c, auto& k, auto& v) { c.r2_max_distance = get_number(k, v); }},
      {"contrasts",
       [](auto& c, auto& k, auto& v) {
         if (!v.is_array()) bad(k, "expected an array of [x1, x2, xbar1, xbar2]");
         c.contrasts.clear();
         for (const auto& e : v) {
           if (!e.is_array() || e.size() != 4) bad(k, "expected an array of [x1, x2, xbar1, xbar2]");
           const Point x = get_point(k, json::array({e[0], e[1]}));
           const Point xb = get_point(k, json::array({e[2], e[3]}));
           c.contrasts.push_back({contrast_name(x, xb), x, xb});
         }
       }},
      {"level", [](auto& c, auto& k, auto& v) { c.coverage.level = get_number(k, v); }},
      {"trials", [](auto& c, auto& k, auto& v) { c.coverage.trials = get_count(k, v); }},
      {"hajek_anchors", [](auto& c, auto& k, auto& v) { c.coverage.hajek.anchors = get_count(k, v); }},
      {"hajek_reps", [](auto& c, auto& k, auto& v) { c.coverage.hajek.mc_reps = get_count(k, v); }},
      {"hajek_focus_share", [](auto& c, auto& k, auto& v) { c.coverage.hajek.focus_share = get_number(k, v); }},
      {"hajek_focus_halfwidth",
       [](auto& c, auto& k, auto& v) { c.coverage.hajek.focus_halfwidth = get_number(k, v); }},
      {"hajek_debias", [](auto& c, auto& k, auto& v) { c.coverage.debias = get_bool(k, v); }},
      {"stability_rules", [](auto& c, auto& k, auto& v) { c.stability_rules = get_strings(k, v); }},
      {"stability_m", [](auto& c, auto& k, auto& v) { c.stability_m = get_counts(k, v); }},
      {"stability_reps", [](auto& c, auto& k, auto& v) { c.stability_reps = get_count(k, v); }},
      {"stability_x1", [](auto& c, auto& k, auto& v) { c.stability_x1 = get_point(k, v); }},
      {"stability_depth",
       [](auto& c, auto& k, auto& v) { c.stability_depth = static_cast<int>(get_count(k, v)); }},
      {"cooccur_s", [](auto& c, auto& k, auto& v) { c.cooccur_s = get_counts(k, v); }},
      {"cooccur_trees", [](auto& c, auto& k, auto& v) { c.cooccur_trees = get_count(k, v); }},
      {"cooccur_k", [](auto& c, auto& k, auto& v) { c.cooccur_k = get_count(k, v); }},
      {"cooccur_delta", [](auto& c, auto& k, auto& v) { c.cooccur_delta = get_number(k, v); }},
      {"cooccur_x", [](auto& c, auto& k, auto& v) { c.cooccur_x = get_point(k, v); }},
      {"cooccur_x_bar", [](auto& c, auto& k, auto& v) { c.cooccur_x_bar = get_point(k, v); }},
      {"cooccur_conditional", [](auto& c, auto& k, auto& v) { c.cooccur_conditional = get_bool(k, v); }},
  };
  return table;
}

json points_json(const std::vector<Point>& pts) {
  json a = json::array();
  for (const auto& p : pts) a.push_back(p);
  return a;
}

json config_json(const ExperimentConfig& c) {
  json j;
  const auto& f = c.design.forest;
  j["n"] = f.n;
  j["s"] = f.s;
  j["trees"] = f.trees;
  j["delta"] = f.delta;
  j["alpha"] = f.alpha;
  j["k"] = f.k;
  j["grid_g"] = f.grid_g;
  j["seed"] = c.design.seed;
  j["noise"] = c.design.noise;
  j["means"] = points_json(c.design.means);
  j["experiments"] = c.experiments;
  j["threads"] = c.threads;
  j["queries"] = points_json(c.queries);
  j["sweep_references"] = points_json(c.sweep.references);
  j["sweep_cells"] = c.sweep.cells;
  j["bucket_width"] = c.sweep.bucket_width;
  j["snap_references"] = c.sweep.snap_references;
  j["eps"] = c.eps;
  j["r2_max_distance"] = c.r2_max_distance;
  json cs = json::array();
  for (const auto& ct : c.contrasts) cs.push_back({ct.x[0], ct.x[1], ct.x_bar[0], ct.x_bar[1]});
  j["contrasts"] = cs;
  j["level"] = c.coverage.level;
  j["trials"] = c.coverage.trials;
  j["hajek_anchors"] = c.coverage.hajek.anchors;
  j["hajek_reps"] = c.coverage.hajek.mc_reps;
  j["hajek_focus_share"] = c.coverage.hajek.focus_share;
  j["hajek_focus_halfwidth"] = c.coverage.hajek.focus_halfwidth;
  j["hajek_debias"] = c.coverage.debias;
  j["stability_rules"] = c.stability_rules;
  j["stability_m"] = c.stability_m;
  j["stability_reps"] = c.stability_reps;
  j["stability_x1"] = c.stability_x1;
  j["stability_depth"] = c.stability_depth;
  j["cooccur_s"] = c.cooccur_s;
  j["cooccur_trees"] = c.cooccur_trees;
  j["cooccur_k"] = c.cooccur_k;
  j["cooccur_delta"] = c.cooccur_delta;
  j["cooccur_x"] = c.cooccur_x;
  j["cooccur_x_bar"] = c.cooccur_x_bar;
  j["cooccur_conditional"] = c.cooccur_conditional;
  return j;
}

bool inside_unit(const Point& p) {
  return p.size() == 2 && p[0] >= 0.0 && p[0] <= 1.0 && p[1] >= 0.0 && p[1] <= 1.0;
}

const std::vector<std::string>& step_names() {
  static const std::vector<std::string> names{"simulate", "sweep", "coverage", "stability", "cooccur"};
  return names;
}

SplitRule make_rule(const std::string& name, const ExperimentConfig& cfg) {
  auto first = [](std::span<const double> x) { return x[0]; };
  auto mean0 = [](std::span<const double> mu) { return mu[0]; };
  if (name == "lipschitz_separated") {
    return lipschitz_mean_rule({first}, {mean0, [](std::span<const double>) { return 0.42; }});
  }
  if (name == "lipschitz_knife_edge") {
    return lipschitz_mean_rule({first}, {mean0, [](std::span<const double>) { return 0.5; }});
  }
  if (name == "argmax_first") return argmax_first_rule();
  if (name == "centroid") return centroid_rule(cfg.design.forest.grid_g, cfg.design.forest.alpha);
  if (name == "ignore_first") {
    return ignore_first_rule(centroid_rule(cfg.design.forest.grid_g, cfg.design.forest.alpha));
  }
  throw KeyError("stability_rules", "stability_rules: unknown rule '" + name + "'");
}

void write_file(const fs::path& path, const std::function<void(std::ostream&)>& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  body(out);
  out.flush();
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

json fit_json(const PowerLawFit& f) {
  json j;
  j["slope"] = f.slope_unbounded_below ? json(nullptr) : json(f.slope);
  j["slope_upper"] = std::isfinite(f.slope_upper) ? json(f.slope_upper) : json(nullptr);
  j["slope_lower"] = std::isfinite(f.slope_lower) ? json(f.slope_lower) : json(nullptr);
  j["slope_unbounded_below"] = f.slope_unbounded_below;
  j["cells"] = f.cells;
  j["nonzero_cells"] = f.nonzero_cells;
  return j;
}

}  // namespace

ConfigParseError::ConfigParseError(const std::string& source, std::size_t line,
                                   const std::string& message)
    : std::runtime_error(source + ":" + std::to_string(line) + ": " + message), line_(line) {}

std::vector<Contrast> default_contrasts() {
  const std::vector<std::array<double, 4>> raw{
      {0.25, 0.25, 0.75, 0.75}, {0.2, 0.7, 0.7, 0.2}, {0.5, 0.5, 0.5, 0.5}};
  std::vector<Contrast> out;
  for (const auto& r : raw) {
    const Point x{r[0], r[1]}, xb{r[2], r[3]};
    out.push_back({contrast_name(x, xb), x, xb});
  }
  return out;
}

std::vector<std::string> stability_rule_names() {
  return {"lipschitz_separated", "lipschitz_knife_edge", "argmax_first", "centroid", "ignore_first"};
}

void apply_setting(ExperimentConfig& cfg, const std::string& key, const json& value) {
  const auto it = setters().find(key);
  if (it == setters().end()) throw KeyError(key, "unknown key '" + key + "'");
  it->second(cfg, key, value);
}

void validate_config(const ExperimentConfig& c) {
  const auto& f = c.design.forest;
  if (f.n < 1) bad("n", "must be at least 1");
  if (f.s < 1 || f.s > f.n) bad("s", "must satisfy 1 <= s <= n");
  if (f.trees < 1) bad("trees", "must be at least 1");
  if (!(f.delta >= 0.0 && f.delta <= 1.0)) bad("delta", "must lie in [0, 1]");
  if (!(f.alpha > 0.0 && f.alpha < 0.5)) bad("alpha", "must lie in (0, 1/2)");
  if (f.k < 1) bad("k", "must be at least 1");
  if (f.grid_g < 2) bad("grid_g", "must be at least 2");
  if (!(c.design.noise > 0.0)) bad("noise", "must be positive");
  if (c.design.means.empty()) bad("means", "need at least one component");
  for (const auto& m : c.design.means) {
    if (!(m[0] > 0.0 && m[0] < 1.0 && m[1] > 0.0 && m[1] < 1.0)) bad("means", "must lie inside (0,1)^2");
  }
  for (const auto& e : c.experiments) {
    if (std::find(step_names().begin(), step_names().end(), e) == step_names().end()) {
      bad("experiments", "unknown experiment '" + e + "'");
    }
  }
  if (c.threads < 1) bad("threads", "must be at least 1");
  for (const auto& q : c.queries) {
    if (!inside_unit(q)) bad("queries", "points must lie in [0,1]^2");
  }
  for (const auto& q : c.sweep.references) {
    if (!inside_unit(q)) bad("sweep_references", "points must lie in [0,1]^2");
  }
  if (c.sweep.cells < 1) bad("sweep_cells", "must be at least 1");
  if (!(c.sweep.bucket_width > 0.0)) bad("bucket_width", "must be positive");
  if (!(c.eps >= 0.0)) bad("eps", "must be non-negative");
  if (!(c.r2_max_distance > 0.0)) bad("r2_max_distance", "must be positive");
  for (const auto& ct : c.contrasts) {
    if (!inside_unit(ct.x) || !inside_unit(ct.x_bar)) bad("contrasts", "points must lie in [0,1]^2");
  }
  if (!(c.coverage.level > 0.0 && c.coverage.level < 1.0)) bad("level", "must lie in (0, 1)");
  if (c.coverage.trials < 100) bad("trials", "must be at least 100");
  if (c.coverage.hajek.anchors < 2) bad("hajek_anchors", "must be at least 2");
  if (c.coverage.hajek.mc_reps < 2) bad("hajek_reps", "must be at least 2");
  if (!(c.coverage.hajek.focus_share >= 0.0 && c.coverage.hajek.focus_share < 1.0)) {
    bad("hajek_focus_share", "must lie in [0, 1)");
  }
  if (!(c.coverage.hajek.focus_halfwidth > 0.0)) bad("hajek_focus_halfwidth", "must be positive");
  const auto names = stability_rule_names();
  for (const auto& r : c.stability_rules) {
    if (std::find(names.begin(), names.end(), r) == names.end()) {
      bad("stability_rules", "unknown rule '" + r + "'");
    }
  }
  for (std::size_t m : c.stability_m) {
    if (m < 2) bad("stability_m", "node sizes must be at least 2");
  }
  if (c.stability_reps < 1) bad("stability_reps", "must be at least 1");
  if (!inside_unit(c.stability_x1)) bad("stability_x1", "must lie in [0,1]^2");
  if (c.stability_depth != 1 && c.stability_depth != 2) bad("stability_depth", "must be 1 or 2");
  for (std::size_t s : c.cooccur_s) {
    if (s < 1) bad("cooccur_s", "sizes must be at least 1");
  }
  if (c.cooccur_trees < 1) bad("cooccur_trees", "must be at least 1");
  if (c.cooccur_k < 1) bad("cooccur_k", "must be at least 1");
  if (!(c.cooccur_delta >= 0.0 && c.cooccur_delta <= 1.0)) bad("cooccur_delta", "must lie in [0, 1]");
  if (!inside_unit(c.cooccur_x)) bad("cooccur_x", "must lie in [0,1]^2");
  if (!inside_unit(c.cooccur_x_bar)) bad("cooccur_x_bar", "must lie in [0,1]^2");
}

ExperimentConfig parse_config(std::string_view text, const std::string& source) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    // e.byte is one past the offending character
    throw ConfigParseError(source, line_of_offset(text, e.byte == 0 ? 0 : e.byte - 1),
                           "invalid JSON: " + std::string(e.what()));
  }
  if (!doc.is_object()) throw ConfigParseError(source, 1, "the configuration must be a JSON object");
  const auto lines = key_lines(text);
  auto line_for = [&](const std::string& key) {
    const auto it = lines.find(key);
    return it == lines.end() ? std::size_t{1} : it->second;
  };

  ExperimentConfig cfg;
  cfg.contrasts = default_contrasts();
  for (const auto& [key, value] : doc.items()) {
    if (value.is_object()) throw ConfigParseError(source, line_for(key), key + ": nested objects are not allowed");
    try {
      apply_setting(cfg, key, value);
    } catch (const KeyError& e) {
      throw ConfigParseError(source, line_for(key), e.what());
    } catch (const json::exception& e) {
      throw ConfigParseError(source, line_for(key), key + ": " + e.what());
    }
  }
  try {
    validate_config(cfg);
  } catch (const KeyError& e) {
    throw ConfigParseError(source, line_for(e.key), e.what());
  }
  cfg.echo = config_json(cfg);
  return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigParseError(path.string(), 0, "cannot read file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.string());
}

StepResult run_simulate(const ExperimentConfig& cfg, const fs::path& out) {
  StepResult r;
  r.name = "simulate";
  std::vector<Point> queries = cfg.queries;
  if (queries.empty()) {
    queries = cfg.design.means;
    queries.push_back({0.5, 0.5});
  }
  Rng rng = make_rng(cfg.design.seed, Stream::data, 0);
  const Dataset data = sample_design(cfg.design, cfg.design.forest.n, rng);
  ForestConfig fc = cfg.design.forest;
  fc.seed = derive_seed(cfg.design.seed, Stream::tree, 0);
  const JointEstimate est = fit_forest(data, queries, fc, cfg.threads);
  double worst = 0.0;
  write_file(out / "estimates.csv", [&](std::ostream& os) {
    CsvWriter w(os, {"x1", "x2", "estimate", "truth", "tree_variance"});
    for (std::size_t i = 0; i < queries.size(); ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      const double truth = MixtureSampler::regression_function(queries[i]);
      worst = std::max(worst, std::abs(est.estimates(ii) - truth));
      w.row({format_number(queries[i][0]), format_number(queries[i][1]), format_number(est.estimates(ii)),
             format_number(truth), format_number(est.cov(ii, ii))});
    }
  });
  r.files.push_back("estimates.csv");
  r.summary["max_abs_error"] = worst;
  r.summary["trees"] = est.trees_used;
  r.ok = true;
  return r;
}

StepResult run_sweep(const ExperimentConfig& cfg, const fs::path& out) {
  StepResult r;
  r.name = "sweep";
  SweepOptions so = cfg.sweep;
  so.threads = cfg.threads;
  const CorrelationCurve curve = correlation_sweep(cfg.design, so);
  const HeuristicComparison cmp = heuristic_compare(curve, cfg.design.forest.s, 2, cfg.eps);
  write_file(out / "curve.csv", [&](std::ostream& os) { write_curve_csv(os, curve); });
  write_file(out / "curve_log.csv", [&](std::ostream& os) { write_curve_csv(os, log_curve(curve)); });
  write_file(out / "heuristic.csv", [&](std::ostream& os) { write_heuristic_csv(os, cmp); });
  r.files = {"curve.csv", "curve_log.csv", "heuristic.csv"};
  r.summary["bucket0_correlation"] = curve.rows.empty() ? json(nullptr) : json(curve.rows.front().correlation);
  r.summary["evaluated_pairs"] = curve.evaluated;
  r.summary["excluded_pairs"] = curve.excluded;
  r.summary["references"] = points_json(curve.references);
  r.summary["monotonicity_violations"] = monotonicity_violations(curve).size();
  try {
    r.summary["log_linear_r2"] = log_linear_r2(curve, cfg.r2_max_distance);
  } catch (const InsufficientDataError&) {
    r.summary["log_linear_r2"] = nullptr;
  }
  r.summary["lambda"] = cmp.lambda;
  r.summary["linear_bound_conservative_beyond_0.05"] = cmp.conservative_beyond(0.05);
  r.ok = true;
  return r;
}

StepResult run_coverage(const ExperimentConfig& cfg, const fs::path& out) {
  StepResult r;
  r.name = "coverage";
  CoverageOptions co = cfg.coverage;
  co.eps = cfg.eps;
  co.threads = cfg.threads;
  const CoverageTable table = coverage_table(cfg.design, cfg.contrasts, co);
  write_file(out / "coverage.csv", [&](std::ostream& os) { write_coverage_csv(os, table); });
  r.files.push_back("coverage.csv");
  json rows = json::array();
  for (const auto& row : table.rows) {
    rows.push_back({{"contrast", row.contrast}, {"mode", mode_name(row.mode)}, {"coverage", row.coverage},
                    {"mean_half_width", row.mean_half_width}, {"mean_error", row.mean_error},
                    {"empirical_sd", row.empirical_sd}, {"l1_distance", row.l1_distance}});
  }
  r.summary["rows"] = rows;
  r.summary["points"] = points_json(table.points);
  r.summary["v_hat"] = matrix_to_json(table.variance.v_hat);
  r.ok = true;
  return r;
}

StepResult run_stability(const ExperimentConfig& cfg, const fs::path& out) {
  StepResult r;
  r.name = "stability";
  std::vector<CouplingRun> runs;
  json verdicts = json::object();
  for (std::size_t ri = 0; ri < cfg.stability_rules.size(); ++ri) {
    const std::string& name = cfg.stability_rules[ri];
    const SplitRule rule = make_rule(name, cfg);
    std::vector<CouplingRun> series;
    for (std::size_t mi = 0; mi < cfg.stability_m.size(); ++mi) {
      CouplingOptions o;
      o.reps = cfg.stability_reps;
      o.threads = cfg.threads;
      o.seed = derive_seed(derive_seed(cfg.design.seed, Stream::coupling, ri), Stream::coupling, mi);
      const std::size_t m = cfg.stability_m[mi];
      series.push_back(cfg.stability_depth == 2
                           ? coupled_split_tv_depth2(name, rule, NodeBox::unit(2), m, cfg.stability_x1, o)
                           : coupled_split_tv(name, rule, NodeBox::unit(2), m, cfg.stability_x1, o));
    }
    json v;
    try {
      const StabilityVerdict sv = stability_classify(series);
      v["stable"] = sv.stable;
      v["all_zero"] = sv.all_zero;
      v["delta_hat"] = std::isfinite(sv.delta_hat) ? json(sv.delta_hat) : json(nullptr);
      v["delta_lower"] = std::isfinite(sv.delta_lower) ? json(sv.delta_lower) : json(nullptr);
      v["tv_upper"] = sv.tv_upper;
      if (sv.fit) v["fit"] = fit_json(*sv.fit);
    } catch (const std::exception& e) {
      v["error"] = e.what();
    }
    verdicts[name] = v;
    runs.insert(runs.end(), series.begin(), series.end());
  }
  write_file(out / "stability.csv", [&](std::ostream& os) { write_stability_csv(os, runs); });
  r.files.push_back("stability.csv");
  r.summary["verdicts"] = verdicts;
  r.ok = true;
  return r;
}

StepResult run_cooccur(const ExperimentConfig& cfg, const fs::path& out) {
  StepResult r;
  r.name = "cooccur";
  const MixtureSampler sampler(cfg.design);
  std::vector<CooccurEstimate> rows;
  for (std::size_t i = 0; i < cfg.cooccur_s.size(); ++i) {
    ForestConfig fc = cfg.design.forest;
    fc.n = fc.s = cfg.cooccur_s[i];
    fc.trees = cfg.cooccur_trees;
    fc.k = cfg.cooccur_k;
    fc.delta = cfg.cooccur_delta;
    fc.seed = derive_seed(cfg.design.seed, Stream::fresh, i);
    rows.push_back(estimate_m(sampler, cfg.cooccur_x, cfg.cooccur_x_bar, fc, cfg.cooccur_conditional, cfg.threads));
  }
  write_file(out / "cooccur.csv", [&](std::ostream& os) { write_cooccur_csv(os, rows); });
  r.files.push_back("cooccur.csv");
  try {
    r.summary["count_fit"] = fit_json(decay_fit_counts(rows));
  } catch (const std::exception& e) {
    r.summary["count_fit"] = {{"error", e.what()}};
  }
  try {
    const DecayFit f = decay_fit(std::span<const CooccurEstimate>(rows));
    r.summary["log_fit"] = {{"slope", f.slope}, {"slope_upper", f.slope_upper}, {"used", f.used},
                            {"dropped", f.dropped}};
  } catch (const std::exception& e) {
    r.summary["log_fit"] = {{"error", e.what()}};
  }
  r.ok = true;
  return r;
}

StepResult run_step(const std::string& name, const ExperimentConfig& cfg, const fs::path& out) {
  const auto start = std::chrono::steady_clock::now();
  StepResult r;
  try {
    if (name == "simulate") r = run_simulate(cfg, out);
    else if (name == "sweep") r = run_sweep(cfg, out);
    else if (name == "coverage") r = run_coverage(cfg, out);
    else if (name == "stability") r = run_stability(cfg, out);
    else if (name == "cooccur") r = run_cooccur(cfg, out);
    else throw ConfigError("unknown experiment '" + name + "'");
  } catch (const std::exception& e) {
    r.ok = false;
    r.error = e.what();
  }
  r.name = name;
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

json build_info() {
  json j;
  j["honestrf"] = kVersion;
#if defined(__clang__)
  j["compiler"] = fmt::format("clang {}.{}.{}", __clang_major__, __clang_minor__, __clang_patchlevel__);
#elif defined(__GNUC__)
  j["compiler"] = fmt::format("gcc {}.{}.{}", __GNUC__, __GNUC_MINOR__, __GNUC_PATCHLEVEL__);
#endif
  j["eigen"] = fmt::format("{}.{}.{}", EIGEN_WORLD_VERSION, EIGEN_MAJOR_VERSION, EIGEN_MINOR_VERSION);
  j["boost"] = fmt::format("{}.{}.{}", BOOST_VERSION / 100000, BOOST_VERSION / 100 % 1000, BOOST_VERSION % 100);
  j["fmt"] = FMT_VERSION;
  j["nlohmann_json"] = fmt::format("{}.{}.{}", NLOHMANN_JSON_VERSION_MAJOR, NLOHMANN_JSON_VERSION_MINOR,
                                   NLOHMANN_JSON_VERSION_PATCH);
  return j;
}

bool run_experiment(const ExperimentConfig& cfg, const std::vector<std::string>& steps,
                    const fs::path& out, std::vector<StepResult>* results) {
  fs::create_directories(out);
  const auto start = std::chrono::steady_clock::now();
  json manifest;
  manifest["tool"] = "honestrf";
  manifest["build"] = build_info();
  manifest["seed"] = cfg.design.seed;
  manifest["threads"] = cfg.threads;
  manifest["config"] = cfg.echo.empty() ? config_json(cfg) : cfg.echo;
  manifest["steps"] = json::array();
  bool ok = true;
  for (const auto& name : steps) {
    StepResult r = run_step(name, cfg, out);
    ok = ok && r.ok;
    json s{{"name", r.name}, {"ok", r.ok}, {"seconds", r.seconds}, {"files", r.files}, {"summary", r.summary}};
    if (!r.ok) s["error"] = r.error;
    manifest["steps"].push_back(s);
    if (results) results->push_back(std::move(r));
  }
  manifest["ok"] = ok;
  manifest["total_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_file(out / "manifest.json", [&](std::ostream& os) { os << manifest.dump(2) << '\n'; });
  return ok;
}

}  // namespace honestrf::sim
