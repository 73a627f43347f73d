#pragma once

#include <CLI11.hpp>
#include <cstdlib>
#include <iostream>

#include "hklab/runner.hpp"

namespace hklab {

/// Subcommands: space | kernel | energy | moment | chain | exponent | all.
/// Exit codes: 0 all enabled suites pass, 1 a suite failed,
/// 2 configuration rejected (with the offending field named), 3 budget
/// exceeded.
inline int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"heat-kernel laboratory: Dirichlet quotients, Besov energies and the "
               "critical-exponent proof chain on finite metric measure spaces"};
  app.require_subcommand(1);

  std::string config_path, out_dir, suite;
  std::uint64_t seed = 0;
  bool seed_set = false;
  unsigned threads = 0;
  std::vector<std::string> overrides;

  app.add_option("--config", config_path, "experiment configuration (JSON)")->required();
  app.add_option("--out", out_dir, "output directory (default from config / HKLAB_OUT)");
  app.add_option("--seed", seed, "random seed (default from config)")
      ->each([&](const std::string&) { seed_set = true; });
  app.add_option("--threads", threads,
                 "worker threads for pair sweeps (default HKLAB_THREADS or all cores; "
                 "results do not depend on it)");
  app.add_option("--suite", suite, "restrict a subcommand to the named run (by kernel/space)");
  app.add_option("--override", overrides, "config override key.path=value (repeatable)");

  std::vector<std::string> subcommands = {"space", "kernel", "energy", "moment",
                                          "chain", "exponent", "all"};
  std::map<std::string, CLI::App*> subs;
  for (const auto& name : subcommands) {
    subs[name] = app.add_subcommand(name, "run the '" + name + "' pipeline stage");
    subs[name]->fallthrough();
  }

  // CLI11 wants argv-style reversed arguments
  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  std::string chosen;
  for (const auto& [name, sub] : subs)
    if (sub->parsed()) chosen = name;

  try {
    ExperimentConfig cfg = ExperimentConfig::load(config_path);
    for (const auto& kv : overrides) cfg.apply_override(kv);

    std::string out = !out_dir.empty() ? out_dir : std::string();
    if (out.empty()) {
      if (const char* env = std::getenv("HKLAB_OUT")) out = env;
      else out = cfg.output_dir();
    }
    unsigned nthreads = threads;
    if (nthreads == 0) {
      if (const char* env = std::getenv("HKLAB_THREADS"))
        nthreads = static_cast<unsigned>(std::strtoul(env, nullptr, 10));
      else nthreads = cfg.threads();
    }
    const std::uint64_t run_seed = seed_set ? seed : cfg.seed();
    Runner runner(std::move(cfg), out, run_seed, nthreads, suite);
    return runner.run(chosen);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const BudgetError& e) {
    std::cerr << "budget exceeded: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace hklab
