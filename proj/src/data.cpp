#include "prodigy/data.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include "prodigy/errors.hpp"
#include "prodigy/rng.hpp"

namespace prodigy {

void LabeledDataset::validate() const {
  if (features.size() != labels.size())
    throw InvalidInput("dataset: " + std::to_string(features.size()) + " feature rows but " +
                       std::to_string(labels.size()) + " labels");
  if (n_classes < 1) throw InvalidInput("dataset: n_classes must be >= 1");
  const std::size_t p = dim();
  for (std::size_t i = 0; i < size(); ++i) {
    if (features[i].size() != p)
      throw InvalidInput("dataset: row " + std::to_string(i) + " has ragged features");
    if (labels[i] < 0 || labels[i] >= n_classes)
      throw InvalidInput("dataset: row " + std::to_string(i) + " label " +
                         std::to_string(labels[i]) + " outside [0, " +
                         std::to_string(n_classes) + ")");
  }
}

LabeledDataset LabeledDataset::subset(std::span<const std::size_t> indices) const {
  LabeledDataset out;
  out.n_classes = n_classes;
  out.features.reserve(indices.size());
  out.labels.reserve(indices.size());
  for (std::size_t i : indices) {
    out.features.push_back(features.at(i));
    out.labels.push_back(labels.at(i));
  }
  return out;
}

LabeledDataset generate_blobs(int n_classes, std::size_t dim, std::size_t per_class,
                              double separation, std::uint64_t seed) {
  if (n_classes < 2) throw InvalidInput("generate_blobs: need at least 2 classes");
  if (per_class < 1) throw InvalidInput("generate_blobs: per_class must be >= 1");
  if (dim < static_cast<std::size_t>(n_classes))
    throw InvalidInput("generate_blobs: dim " + std::to_string(dim) + " < " +
                       std::to_string(n_classes) + " class anchors");
  auto rng = make_rng({seed, 0x626c6f6273ULL});
  std::normal_distribution<double> noise(0.0, 1.0);
  LabeledDataset out;
  out.n_classes = n_classes;
  out.features.reserve(per_class * n_classes);
  out.labels.reserve(per_class * n_classes);
  for (int c = 0; c < n_classes; ++c) {
    for (std::size_t i = 0; i < per_class; ++i) {
      Vector x(dim);
      for (double& v : x) v = noise(rng);
      x[static_cast<std::size_t>(c)] += separation;
      out.features.push_back(std::move(x));
      out.labels.push_back(c);
    }
  }
  return out;
}

namespace {

std::vector<std::vector<std::size_t>> iid_split(std::size_t m, std::size_t n,
                                                std::uint64_t seed) {
  std::vector<std::size_t> perm(m);
  std::iota(perm.begin(), perm.end(), 0);
  auto rng = make_rng({seed, 0x696964ULL});
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<std::vector<std::size_t>> shards(n);
  std::size_t pos = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t take = m / n + (k < m % n ? 1 : 0);
    shards[k].assign(perm.begin() + pos, perm.begin() + pos + take);
    std::sort(shards[k].begin(), shards[k].end());
    pos += take;
  }
  return shards;
}

std::vector<std::vector<std::size_t>> dirichlet_split(const LabeledDataset& data,
                                                      const PartitionSpec& spec,
                                                      std::uint64_t seed, int attempt) {
  auto rng = make_rng({seed, 0x646972ULL, static_cast<std::uint64_t>(attempt)});
  std::gamma_distribution<double> gamma(spec.alpha, 1.0);
  std::vector<std::vector<std::size_t>> shards(spec.n_clients);
  for (int c = 0; c < data.n_classes; ++c) {
    std::vector<double> weights(spec.n_clients);
    double total = 0.0;
    while (total <= 0.0) {
      total = 0.0;
      for (double& w : weights) total += (w = gamma(rng));
    }
    std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
    for (std::size_t i = 0; i < data.size(); ++i)
      if (data.labels[i] == c) shards[pick(rng)].push_back(i);
  }
  for (auto& s : shards) std::sort(s.begin(), s.end());
  return shards;
}

}  // namespace

std::vector<LabeledDataset> partition(const LabeledDataset& data, const PartitionSpec& spec,
                                      std::uint64_t seed) {
  data.validate();
  if (spec.n_clients < 1) throw InvalidInput("partition: n_clients must be >= 1");
  if (spec.kind == PartitionKind::Dirichlet && !(spec.alpha > 0.0))
    throw InvalidInput("partition: alpha must be > 0");

  std::vector<std::vector<std::size_t>> shards;
  if (spec.kind == PartitionKind::IID) {
    if (data.size() / spec.n_clients < spec.min_shard)
      throw InvalidInput("partition: " + std::to_string(data.size()) + " samples cannot give " +
                         std::to_string(spec.n_clients) + " shards of at least " +
                         std::to_string(spec.min_shard));
    shards = iid_split(data.size(), spec.n_clients, seed);
  } else {
    std::size_t small_client = 0;
    std::size_t small_size = 0;
    bool ok = false;
    for (int attempt = 0; attempt < spec.max_retries && !ok; ++attempt) {
      shards = dirichlet_split(data, spec, seed, attempt);
      ok = true;
      for (std::size_t k = 0; k < shards.size(); ++k) {
        if (shards[k].size() < spec.min_shard) {
          ok = false;
          small_client = k;
          small_size = shards[k].size();
          break;
        }
      }
    }
    if (!ok)
      throw InvalidInput("partition: Dirichlet retries exhausted; shard " +
                         std::to_string(small_client) + " got " + std::to_string(small_size) +
                         " samples, min_shard is " + std::to_string(spec.min_shard));
  }

  std::vector<LabeledDataset> out;
  out.reserve(shards.size());
  for (const auto& idx : shards) out.push_back(data.subset(idx));
  return out;
}

LabeledDataset flip_labels(const LabeledDataset& data) {
  LabeledDataset out = data;
  for (int& y : out.labels) y = (data.n_classes - 1) - y;
  return out;
}

std::vector<std::size_t> label_histogram(const LabeledDataset& data) {
  std::vector<std::size_t> hist(static_cast<std::size_t>(std::max(data.n_classes, 0)), 0);
  for (int y : data.labels) ++hist.at(static_cast<std::size_t>(y));
  return hist;
}

void write_dataset_csv(std::ostream& os, const LabeledDataset& data) {
  const std::size_t p = data.dim();
  for (std::size_t i = 0; i < p; ++i) os << 'f' << i << ',';
  os << "label\n";
  const auto old_precision = os.precision(17);
  for (std::size_t r = 0; r < data.size(); ++r) {
    for (double x : data.features[r]) os << x << ',';
    os << data.labels[r] << '\n';
  }
  os.precision(old_precision);
}

LabeledDataset read_dataset_csv(std::istream& is, std::optional<int> n_classes) {
  std::string line;
  if (!std::getline(is, line)) throw InvalidInput("dataset csv: missing header");
  const auto columns = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
  if (columns < 2) throw InvalidInput("dataset csv: need at least one feature and a label");

  LabeledDataset out;
  std::size_t row = 0;
  while (std::getline(is, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream cells(line);
    std::string cell;
    Vector x;
    x.reserve(columns - 1);
    int label = -1;
    std::size_t col = 0;
    try {
      while (std::getline(cells, cell, ',')) {
        if (col + 1 < columns)
          x.push_back(std::stod(cell));
        else
          label = std::stoi(cell);
        ++col;
      }
    } catch (const std::exception&) {
      throw InvalidInput("dataset csv: unparsable value on data row " + std::to_string(row));
    }
    if (col != columns)
      throw InvalidInput("dataset csv: data row " + std::to_string(row) + " has " +
                         std::to_string(col) + " columns, expected " + std::to_string(columns));
    out.features.push_back(std::move(x));
    out.labels.push_back(label);
  }
  if (out.empty()) throw InvalidInput("dataset csv: no data rows");
  out.n_classes = n_classes.value_or(*std::max_element(out.labels.begin(), out.labels.end()) + 1);
  out.validate();
  return out;
}

}  // namespace prodigy
