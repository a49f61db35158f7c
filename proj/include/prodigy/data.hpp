#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "prodigy/geometry.hpp"

namespace prodigy {

struct LabeledDataset {
  std::vector<Vector> features;
  std::vector<int> labels;
  int n_classes = 0;

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return features.empty() ? 0 : features.front().size(); }
  bool empty() const { return labels.empty(); }

  /// Throws InvalidInput on ragged features, label/feature count mismatch or
  /// labels outside [0, n_classes). Empty datasets are allowed here.
  void validate() const;
  LabeledDataset subset(std::span<const std::size_t> indices) const;
};

/// Gaussian blobs: class c is N(separation * e_c, I) in `dim` dimensions.
/// Requires dim >= n_classes (one axis per class anchor).
LabeledDataset generate_blobs(int n_classes, std::size_t dim, std::size_t per_class,
                              double separation, std::uint64_t seed);

enum class PartitionKind { IID, Dirichlet };

struct PartitionSpec {
  PartitionKind kind = PartitionKind::IID;
  double alpha = 0.1;
  std::size_t n_clients = 1;
  /// Smallest acceptable shard. Dirichlet draws that violate it are redrawn.
  std::size_t min_shard = 1;
  int max_retries = 200;
};

/// IID: shuffled split into near-equal shards. Dirichlet: for each class draw
/// p ~ Dir_N(alpha), then send each sample of that class to client k with
/// probability p_k. Shards keep the input order of their samples.
std::vector<LabeledDataset> partition(const LabeledDataset& data, const PartitionSpec& spec,
                                      std::uint64_t seed);

/// y -> (C - 1) - y.
LabeledDataset flip_labels(const LabeledDataset& data);

std::vector<std::size_t> label_histogram(const LabeledDataset& data);

/// Header f0..f{p-1},label; one row per sample.
void write_dataset_csv(std::ostream& os, const LabeledDataset& data);
/// Reads the format above. Without `n_classes` the class count is max label + 1.
LabeledDataset read_dataset_csv(std::istream& is, std::optional<int> n_classes = std::nullopt);

}  // namespace prodigy
