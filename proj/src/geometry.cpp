#include "prodigy/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <string>
#include <unordered_set>

#include "prodigy/errors.hpp"

namespace prodigy {

GradientSet::GradientSet(std::vector<Vector> vectors)
    : GradientSet(std::move(vectors), {}) {}

GradientSet::GradientSet(std::vector<Vector> vectors, std::vector<int> client_ids)
    : vectors_(std::move(vectors)), client_ids_(std::move(client_ids)) {
  if (vectors_.empty()) throw InvalidInput("GradientSet: no vectors");
  if (client_ids_.empty()) {
    client_ids_.resize(vectors_.size());
    std::iota(client_ids_.begin(), client_ids_.end(), 0);
  }
  if (client_ids_.size() != vectors_.size())
    throw InvalidInput("GradientSet: client id count does not match vector count");

  const std::size_t d = vectors_.front().size();
  if (d == 0) throw InvalidInput("GradientSet: zero-dimensional vectors");
  std::unordered_set<int> seen;
  for (std::size_t k = 0; k < vectors_.size(); ++k) {
    const int id = client_ids_[k];
    if (!seen.insert(id).second)
      throw InvalidInput("GradientSet: duplicate client id " + std::to_string(id));
    if (vectors_[k].size() != d)
      throw InvalidInput("GradientSet: client " + std::to_string(id) + " has dimension " +
                         std::to_string(vectors_[k].size()) + ", expected " +
                         std::to_string(d));
    for (double x : vectors_[k]) {
      if (!std::isfinite(x))
        throw InvalidInput("GradientSet: non-finite component from client " +
                           std::to_string(id));
    }
  }
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = a[i] - b[i];
    acc += diff * diff;
  }
  return acc;
}

double norm(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc);
}

DistanceMatrix pairwise_sq_distances(const GradientSet& g) {
  const std::size_t n = g.size();
  DistanceMatrix m(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dist = squared_distance(g[i], g[j]);
      m(i, j) = dist;
      m(j, i) = dist;
    }
  }
  return m;
}

NeighborOrder neighbor_order(const DistanceMatrix& m) {
  const std::size_t n = m.size();
  NeighborOrder order;
  order.neighbors.resize(n);
  order.distances.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    auto& nbrs = order.neighbors[k];
    nbrs.reserve(n - 1);
    for (std::size_t j = 0; j < n; ++j)
      if (j != k) nbrs.push_back(j);
    const auto row = m.row(k);
    // Candidates start in ascending index order, so a stable sort breaks ties by index.
    std::stable_sort(nbrs.begin(), nbrs.end(),
                     [&](std::size_t a, std::size_t b) { return row[a] < row[b]; });
    auto& dists = order.distances[k];
    dists.reserve(n - 1);
    for (std::size_t j : nbrs) dists.push_back(row[j]);
  }
  return order;
}

namespace {

template <typename Get>
VectorSetStats stats_impl(std::size_t count, Get&& get) {
  if (count == 0) throw InvalidInput("vector_set_stats: empty subset");
  const std::size_t d = get(0).size();
  VectorSetStats out;
  out.mean.assign(d, 0.0);
  for (std::size_t i = 0; i < count; ++i) {
    const Vector& v = get(i);
    if (v.size() != d) throw InvalidInput("vector_set_stats: dimension mismatch");
    for (std::size_t c = 0; c < d; ++c) out.mean[c] += v[c];
  }
  const double inv = 1.0 / static_cast<double>(count);
  for (double& x : out.mean) x *= inv;
  double acc = 0.0;
  for (std::size_t i = 0; i < count; ++i) acc += squared_distance(get(i), out.mean);
  out.spread = std::sqrt(acc * inv);
  return out;
}

}  // namespace

VectorSetStats vector_set_stats(const GradientSet& g, std::span<const std::size_t> members) {
  return stats_impl(members.size(), [&](std::size_t i) -> const Vector& { return g[members[i]]; });
}

VectorSetStats vector_set_stats(std::span<const Vector> subset) {
  return stats_impl(subset.size(), [&](std::size_t i) -> const Vector& { return subset[i]; });
}

void write_distance_csv(std::ostream& os, const DistanceMatrix& m,
                        const std::vector<int>& client_ids) {
  const std::size_t n = m.size();
  if (client_ids.size() != n) throw InvalidInput("write_distance_csv: id count mismatch");
  os << "client";
  for (int id : client_ids) os << ',' << id;
  os << '\n';
  const auto old_precision = os.precision(17);
  for (std::size_t i = 0; i < n; ++i) {
    os << client_ids[i];
    for (std::size_t j = 0; j < n; ++j) os << ',' << m(i, j);
    os << '\n';
  }
  os.precision(old_precision);
}

}  // namespace prodigy
