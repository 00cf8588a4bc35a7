#include <cstdlib>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "honestrf/core/errors.hpp"
#include "honestrf/sim/experiment.hpp"

namespace {

constexpr int kExitPartial = 1;
constexpr int kExitConfig = 2;

struct Args {
  std::string config;
  std::uint64_t seed = 0;
  std::string out = "out";
  std::size_t threads = 0;
  std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, Args& a) {
  cmd->add_option("--config", a.config, "flat JSON configuration file")->check(CLI::ExistingFile);
  cmd->add_option("--seed", a.seed, "master seed")->required();
  cmd->add_option("--out", a.out, "output directory")->capture_default_str();
  cmd->add_option("--threads", a.threads, "worker threads (overrides the config)")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--set", a.sets, "override one key, key=value with a JSON value");
}

honestrf::sim::ExperimentConfig build_config(const Args& a) {
  using namespace honestrf::sim;
  ExperimentConfig cfg = a.config.empty() ? parse_config("{}", "<defaults>") : load_config(a.config);
  for (const auto& kv : a.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) throw honestrf::ConfigError("--set " + kv + ": expected key=value");
    const std::string key = kv.substr(0, eq);
    const std::string text = kv.substr(eq + 1);
    nlohmann::json value = nlohmann::json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;  // bare words are strings
    try {
      apply_setting(cfg, key, value);
    } catch (const std::exception& e) {
      throw honestrf::ConfigError(std::string("--set: ") + e.what());
    }
  }
  cfg.design.seed = a.seed;
  if (a.threads > 0) cfg.threads = a.threads;
  try {
    validate_config(cfg);
  } catch (const std::exception& e) {
    throw honestrf::ConfigError(std::string("after overrides: ") + e.what());
  }
  cfg.echo = nlohmann::json::object();  // regenerated from the final values
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Honest subsampled random forest experiments"};
  app.require_subcommand(1);
  Args args;
  std::vector<std::pair<CLI::App*, std::string>> cmds;
  for (const char* name : {"simulate", "sweep", "coverage", "stability", "cooccur"}) {
    auto* cmd = app.add_subcommand(name, std::string("run the ") + name + " experiment");
    add_common(cmd, args);
    cmds.emplace_back(cmd, name);
  }
  auto* run = app.add_subcommand("run", "run the steps listed under \"experiments\" in the config");
  add_common(run, args);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? EXIT_SUCCESS : kExitConfig;
  }

  honestrf::sim::ExperimentConfig cfg;
  try {
    cfg = build_config(args);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }

  std::vector<std::string> steps;
  if (run->parsed()) {
    steps = cfg.experiments;
  } else {
    for (const auto& [cmd, name] : cmds) {
      if (cmd->parsed()) steps.push_back(name);
    }
  }

  std::vector<honestrf::sim::StepResult> results;
  bool ok = false;
  try {
    ok = honestrf::sim::run_experiment(cfg, steps, args.out, &results);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitPartial;
  }
  for (const auto& r : results) {
    std::cerr << r.name << ": " << (r.ok ? "ok" : "FAILED") << " (" << r.seconds << " s)";
    if (!r.ok) std::cerr << ": " << r.error;
    std::cerr << '\n';
  }
  return ok ? EXIT_SUCCESS : kExitPartial;
}
