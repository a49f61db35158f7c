// prodigy: Byzantine-robust federated learning simulator.
//
//   prodigy run --config <path>
//   prodigy sweep --config <path> [--jobs K]
//   prodigy verify [--quick]
//   prodigy partition-preview --config <path>
//
// Exit codes: 0 ok, 1 config error, 2 runtime error, 3 verification failure.

#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "prodigy/bench.hpp"
#include "prodigy/config.hpp"
#include "verification/properties.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kRuntimeError = 2;
constexpr int kVerifyFailed = 3;

template <typename Fn>
int guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const prodigy::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Byzantine-robust federated learning simulator"};
  app.require_subcommand(1);

  std::string config_path;
  unsigned jobs = 1;
  unsigned workers = 1;
  bool quick = false;

  auto* run = app.add_subcommand("run", "Train one configured experiment");
  run->add_option("--config", config_path, "Experiment JSON")->required()->check(CLI::ExistingFile);
  run->add_option("--workers", workers, "Threads for client updates")->check(CLI::PositiveNumber);

  auto* sweep = app.add_subcommand("sweep", "Run a grid of experiments and summarize");
  sweep->add_option("--config", config_path, "Sweep JSON")->required()->check(CLI::ExistingFile);
  sweep->add_option("--jobs", jobs, "Concurrent runs")->check(CLI::PositiveNumber);

  auto* verify = app.add_subcommand("verify", "Run the built-in property and oracle checks");
  verify->add_flag("--quick", quick, "Smaller instance counts");

  auto* preview = app.add_subcommand("partition-preview", "Print per-client label histograms");
  preview->add_option("--config", config_path, "Experiment JSON")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  if (*run) {
    return guarded([&] {
      const auto config = prodigy::load_config(config_path);
      prodigy::TrainingOptions options;
      options.workers = workers;
      const auto s = prodigy::run_experiment(config, options);
      std::printf("final_accuracy=%.4f worst_accuracy=%.4f degenerate_rounds=%zu wall=%.2fs\n",
                  s.final_accuracy, s.worst_accuracy, s.degenerate_rounds, s.wall_seconds);
      std::printf("artifacts in %s\n", config.output_path.c_str());
      return kOk;
    });
  }
  if (*sweep) {
    return guarded([&] {
      const auto spec = prodigy::load_sweep(config_path);
      const auto result = prodigy::run_sweep(spec, jobs);
      prodigy::write_sweep_csv(std::cout, result);
      if (result.failed_runs > 0) {
        std::cerr << result.failed_runs << " of " << result.runs << " runs failed:\n";
        for (const auto& c : result.cells)
          for (const auto& msg : c.failures)
            std::cerr << "  " << c.defense << " / " << c.attack << " " << msg << '\n';
      }
      return kOk;
    });
  }
  if (*preview) {
    return guarded([&] {
      prodigy::partition_preview(std::cout, prodigy::load_config(config_path));
      return kOk;
    });
  }
  if (*verify) {
    return guarded([&] {
      const auto level = quick ? prodigy::verification::Scale::Quick
                               : prodigy::verification::Scale::Desk;
      const auto results = prodigy::verification::run_all(level, std::cout);
      for (const auto& r : results)
        if (!r.passed) return kVerifyFailed;
      return kOk;
    });
  }
  return kOk;
}
