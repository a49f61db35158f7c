#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "prodigy/config.hpp"
#include "prodigy/engine.hpp"

namespace prodigy {

/// Metrics CSV columns, in order.
inline constexpr const char* kMetricsHeader =
    "round,gamma,global_loss,test_accuracy,agg_wall_ms,degenerate_flag";

/// One row per round; loss and accuracy are empty on rounds without evaluation.
void write_metrics_csv(std::ostream& os, const std::vector<RoundRecord>& records);
/// One JSON object per round carrying the ProDiGy trust scores.
void write_trust_jsonl(std::ostream& os, const std::vector<RoundRecord>& records);

void to_json(nlohmann::json& j, const TrustScores& s);

struct RunSummary {
  double final_accuracy = 0.0;
  double worst_accuracy = 0.0;
  std::size_t degenerate_rounds = 0;
  double wall_seconds = 0.0;
};

/// Trains and writes metrics.csv, summary.json and, for ProDiGy,
/// trust_scores.jsonl under config.output_path.
RunSummary run_experiment(const ExperimentConfig& config, const TrainingOptions& options = {});

struct SweepSpec {
  /// Base config document; axes overwrite its fields per grid point.
  nlohmann::json base;
  std::vector<nlohmann::json> attacks;
  std::vector<nlohmann::json> defenses;
  std::vector<std::uint64_t> seeds;
  std::vector<std::size_t> n_byzantine;
  std::vector<std::size_t> n_clients;
  std::size_t max_runs = 1000;
  std::string output_path;

  std::size_t grid_size() const;
};

SweepSpec parse_sweep(const nlohmann::json& doc);
SweepSpec load_sweep(const std::string& path);

struct SweepCell {
  std::string defense;
  std::string attack;
  std::size_t n_clients = 0;
  std::size_t n_byzantine = 0;
  std::vector<double> accuracies;
  std::vector<std::string> failures;
  double mean = 0.0;
  /// Population standard deviation over seeds.
  double std = 0.0;
  /// Minimum cell mean over the attack cells (not "none") for this (defense, N, f).
  double worst_case = 0.0;
};

struct SweepResult {
  std::vector<SweepCell> cells;
  std::size_t runs = 0;
  std::size_t failed_runs = 0;
};

/// Column order of summary.csv.
inline constexpr const char* kSweepHeader =
    "defense,attack,n_clients,n_byzantine,runs,failures,mean_accuracy,std_accuracy,"
    "worst_case_accuracy";

/// Runs every grid point (up to `jobs` at a time), then summarizes from the
/// metrics CSVs on disk into <output_path>/summary.csv.
SweepResult run_sweep(const SweepSpec& spec, unsigned jobs = 1);

/// Final test accuracy read back from a metrics CSV.
double final_accuracy_from_csv(const std::string& path);

void write_sweep_csv(std::ostream& os, const SweepResult& result);

/// Per-client label histogram table for eyeballing the partition.
void partition_preview(std::ostream& os, const ExperimentConfig& config);

}  // namespace prodigy
