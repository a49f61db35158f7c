#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "prodigy/aggregators.hpp"
#include "prodigy/config.hpp"
#include "prodigy/data.hpp"
#include "prodigy/model.hpp"

namespace prodigy {

enum class ClientRole { Honest, Byzantine };

struct ClientState {
  int id = 0;
  ClientRole role = ClientRole::Honest;
  LabeledDataset shard;
  /// Byzantine label-flip clients train on this copy.
  std::optional<LabeledDataset> flipped_shard;
  Vector momentum;
  /// Master seed; batches for round t come from the stream (seed, id, t).
  std::uint64_t seed = 0;
};

/// Last key of the per-client batch stream make_rng({seed, id, t, kBatchSalt}).
inline constexpr std::uint64_t kBatchSalt = 0x6261746368ULL;

/// gamma_hi while t <= switch_frac * T, gamma_lo afterwards.
double lr_schedule(std::size_t t, const TrainSchedule& sched);

/// E batches of size b drawn without replacement from a shard of `shard_size`,
/// reshuffling whenever fewer than b unused samples remain.
std::vector<std::vector<std::size_t>> sample_batches(std::size_t shard_size, std::size_t local_iters,
                                                     std::size_t batch_size, std::mt19937_64& rng);

/// Runs E local SGD steps from theta_t and returns (theta_t - theta_E) / gamma_t,
/// computed as the sum of the E step gradients.
/// `use_flipped` trains on the client's flipped shard.
Vector client_update(const ModelSpec& spec, const Vector& theta_t, const ClientState& client,
                     const TrainSchedule& sched, std::size_t t, bool use_flipped = false);

/// m <- beta * m + (1 - beta) * g; returns the new m.
Vector apply_momentum(ClientState& client, const Vector& g, double beta);

struct RoundRecord {
  std::size_t round = 0;
  double gamma = 0.0;
  std::optional<double> global_loss;
  std::optional<double> test_accuracy;
  double agg_wall_ms = 0.0;
  bool degenerate = false;
  std::optional<TrustScores> scores;
  /// z* or eps* picked by a searched attack.
  std::optional<double> attack_scale;
};

struct PreparedData {
  std::vector<LabeledDataset> shards;
  LabeledDataset test;
  ModelSpec model;
};

/// Generates or loads the data, partitions it, and resolves the model shape.
PreparedData prepare_data(const ExperimentConfig& config);

/// Replaces the configured attack; receives the honest sent updates and the
/// Byzantine ids, returns one update per Byzantine id.
using AttackOverride = std::function<GradientSet(const GradientSet&, std::span<const int>)>;

struct TrainingOptions {
  /// Client updates computed concurrently; results do not depend on it.
  unsigned workers = 1;
  AttackOverride attack_override;
};

struct TrainingResult {
  Vector theta;
  std::vector<RoundRecord> records;
};

TrainingResult run_training(const ExperimentConfig& config, const TrainingOptions& options = {});

/// Byzantine clients are ids 0..f-1 when an attack is configured, none otherwise.
bool has_byzantine_clients(const ExperimentConfig& config);

}  // namespace prodigy
