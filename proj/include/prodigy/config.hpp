#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "prodigy/aggregators.hpp"
#include "prodigy/attacks.hpp"
#include "prodigy/data.hpp"
#include "prodigy/model.hpp"

namespace prodigy {

struct TrainSchedule {
  std::size_t rounds = 300;
  std::size_t local_iters = 1;
  std::size_t batch_size = 16;
  double beta = 0.0;
  double gamma_hi = 0.05;
  double gamma_lo = 0.005;
  double switch_frac = 2.0 / 3.0;

  void validate() const;
};

enum class DataSource { Blobs, Csv };

struct DataSpec {
  DataSource source = DataSource::Blobs;
  // Blobs
  int n_classes = 10;
  std::size_t dim = 20;
  std::size_t per_class = 200;
  std::size_t test_per_class = 100;
  double separation = 4.0;
  // Csv
  std::string train_csv;
  std::string test_csv;

  PartitionKind partition = PartitionKind::IID;
  double alpha = 0.1;
  /// Unset means 2 * batch_size.
  std::optional<std::size_t> min_shard;
};

struct ExperimentConfig {
  std::size_t n_clients = 10;
  std::size_t n_byzantine = 0;
  /// input_dim and n_classes are filled in from the data at run time.
  ModelSpec model;
  DataSpec data;
  TrainSchedule schedule;
  AttackSpec attack;
  AggregatorSpec defense;
  std::uint64_t seed = 1;
  std::size_t eval_every = 10;
  std::string output_path;
  /// Wall-clock aggregation time in the metrics CSV. Off by default because it
  /// makes the CSV differ between otherwise identical runs.
  bool record_timing = false;

  /// Cross-field checks; throws ConfigError with the offending JSON path.
  void validate() const;
};

/// A config value is missing, malformed, unknown or out of range.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string path, const std::string& message)
      : std::runtime_error(path + ": " + message), path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

/// Environment variable naming the default output directory.
inline constexpr const char* kOutputDirEnv = "PRODIGY_OUTPUT_DIR";

/// Parses and validates a config document. Unknown keys are rejected.
ExperimentConfig parse_config(const nlohmann::json& doc);

/// True for integer JSON values >= 0, whether stored signed or unsigned.
bool is_count(const nlohmann::json& v);

ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config(const std::string& path);

/// Attack or defense entry: a bare name or an object with "kind" and parameters.
AttackSpec parse_attack_spec(const nlohmann::json& j, const std::string& path = "$.attack");
AggregatorSpec parse_defense_spec(const nlohmann::json& j, const std::string& path = "$.defense");

/// Echo with every default materialized; parse_config(config_to_json(c)) == c.
nlohmann::json config_to_json(const ExperimentConfig& c);

}  // namespace prodigy
