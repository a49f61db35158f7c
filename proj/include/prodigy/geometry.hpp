#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

namespace prodigy {

using Vector = std::vector<double>;

/// N client update vectors of a common dimension d, plus the client id each
/// one came from. Construction validates shape and finiteness, so every
/// GradientSet in flight is well formed.
class GradientSet {
 public:
  GradientSet() = default;
  /// Client ids default to 0..N-1.
  explicit GradientSet(std::vector<Vector> vectors);
  GradientSet(std::vector<Vector> vectors, std::vector<int> client_ids);

  std::size_t size() const { return vectors_.size(); }
  std::size_t dim() const { return vectors_.empty() ? 0 : vectors_.front().size(); }
  bool empty() const { return vectors_.empty(); }

  const Vector& operator[](std::size_t k) const { return vectors_[k]; }
  std::span<const Vector> vectors() const { return vectors_; }
  const std::vector<int>& client_ids() const { return client_ids_; }

 private:
  std::vector<Vector> vectors_;
  std::vector<int> client_ids_;
};

/// Symmetric N x N matrix of squared Euclidean distances.
class DistanceMatrix {
 public:
  explicit DistanceMatrix(std::size_t n) : n_(n), entries_(n * n, 0.0) {}

  std::size_t size() const { return n_; }
  double operator()(std::size_t i, std::size_t j) const { return entries_[i * n_ + j]; }
  double& operator()(std::size_t i, std::size_t j) { return entries_[i * n_ + j]; }
  std::span<const double> row(std::size_t i) const {
    return {entries_.data() + i * n_, n_};
  }

 private:
  std::size_t n_;
  std::vector<double> entries_;
};

/// For each client, the other clients sorted by ascending squared distance.
/// Ties go to the lower position first. Positions index into the GradientSet
/// the matrix was built from.
struct NeighborOrder {
  std::vector<std::vector<std::size_t>> neighbors;
  std::vector<std::vector<double>> distances;

  std::size_t size() const { return neighbors.size(); }
};

struct VectorSetStats {
  Vector mean;
  /// Root-mean-square distance to the mean (population form).
  double spread = 0.0;
};

DistanceMatrix pairwise_sq_distances(const GradientSet& g);

NeighborOrder neighbor_order(const DistanceMatrix& m);

/// Mean and spread of the vectors named by `members`, summed in the order given.
VectorSetStats vector_set_stats(const GradientSet& g, std::span<const std::size_t> members);
VectorSetStats vector_set_stats(std::span<const Vector> subset);

double squared_distance(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> v);

/// Row per client, header row of client ids.
void write_distance_csv(std::ostream& os, const DistanceMatrix& m,
                        const std::vector<int>& client_ids);

}  // namespace prodigy
