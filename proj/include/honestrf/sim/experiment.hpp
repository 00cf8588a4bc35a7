#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "honestrf/sim/coverage.hpp"
#include "honestrf/sim/design.hpp"
#include "honestrf/sim/sweep.hpp"

namespace honestrf::sim {

/// Flat experiment configuration. Every key is optional; unknown keys are
/// errors so that typos do not silently fall back to defaults.
struct ExperimentConfig {
  SimDesign design;
  std::vector<std::string> experiments{"simulate"};  // steps for `run`
  std::size_t threads = 1;

  std::vector<Point> queries;  // simulate; empty = mixture means plus centre

  SweepOptions sweep;
  double eps = 0.0;               // heuristic exponent for sweep and coverage
  double r2_max_distance = 0.4;

  std::vector<Contrast> contrasts;
  CoverageOptions coverage;

  std::vector<std::string> stability_rules{"lipschitz_separated", "argmax_first"};
  std::vector<std::size_t> stability_m{50, 100, 200, 400, 800};
  std::size_t stability_reps = 20000;
  Point stability_x1{0.9, 0.1};
  int stability_depth = 1;

  std::vector<std::size_t> cooccur_s{128, 256, 512, 1024, 2048};
  std::size_t cooccur_trees = 2000;
  std::size_t cooccur_k = 16;
  double cooccur_delta = 0.6;
  Point cooccur_x{0.1, 0.1};
  Point cooccur_x_bar{0.35, 0.35};
  bool cooccur_conditional = false;

  /// Values as finally applied, for the manifest.
  nlohmann::json echo = nlohmann::json::object();
};

/// Location-aware parse failure; what() is "source:line: message".
class ConfigParseError : public std::runtime_error {
 public:
  ConfigParseError(const std::string& source, std::size_t line, const std::string& message);
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Default contrasts: two distant pairs and one degenerate pair.
std::vector<Contrast> default_contrasts();

/// Parses a flat JSON object and validates the result.
ExperimentConfig parse_config(std::string_view text, const std::string& source = "<config>");
ExperimentConfig load_config(const std::filesystem::path& path);

/// Sets one key as if it appeared in the file (used for CLI overrides). The
/// caller should call validate_config afterwards.
void apply_setting(ExperimentConfig& cfg, const std::string& key, const nlohmann::json& value);
void validate_config(const ExperimentConfig& cfg);

/// Names accepted for stability_rules.
std::vector<std::string> stability_rule_names();

struct StepResult {
  std::string name;
  bool ok = false;
  std::string error;
  double seconds = 0.0;
  std::vector<std::string> files;
  nlohmann::json summary = nlohmann::json::object();
};

/// Individual experiments. Each writes its CSV files into `out` and returns a
/// summary for the manifest.
StepResult run_simulate(const ExperimentConfig& cfg, const std::filesystem::path& out);
StepResult run_sweep(const ExperimentConfig& cfg, const std::filesystem::path& out);
StepResult run_coverage(const ExperimentConfig& cfg, const std::filesystem::path& out);
StepResult run_stability(const ExperimentConfig& cfg, const std::filesystem::path& out);
StepResult run_cooccur(const ExperimentConfig& cfg, const std::filesystem::path& out);
StepResult run_step(const std::string& name, const ExperimentConfig& cfg,
                    const std::filesystem::path& out);

/// Runs the given steps in order, keeping going after a failure, and writes
/// manifest.json. Returns true when every step succeeded.
bool run_experiment(const ExperimentConfig& cfg, const std::vector<std::string>& steps,
                    const std::filesystem::path& out, std::vector<StepResult>* results = nullptr);

nlohmann::json build_info();

}  // namespace honestrf::sim
