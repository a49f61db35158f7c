#pragma once

#include <cstddef>
#include <vector>

#include "prodigy/geometry.hpp"

namespace prodigy {

struct ProdigyParams {
  std::size_t n_clients = 0;
  std::size_t n_byzantine = 0;
  /// Added to both score denominators so identical updates stay finite.
  double epsilon_guard = 1e-12;

  /// Throws InvalidInput unless 1 <= f < N/2 and epsilon_guard > 0.
  void validate() const;
};

/// Per-client scores from one ProDiGy round.
struct TrustScores {
  std::vector<double> proximity;
  std::vector<double> dissimilarity;
  std::vector<double> composite;
  std::vector<double> final;
  double threshold = 0.0;
};

struct ProdigyResult {
  Vector aggregate;
  TrustScores scores;
  /// Every client was filtered out. `aggregate` is then the zero vector.
  bool degenerate = false;
};

/// s_p(k) = 1 / (sum of the sorted neighbor distances at 1-based ranks
/// f..N-f-1, plus the guard). Skips the f-1 nearest and the f farthest.
std::vector<double> proximity_scores(const NeighborOrder& order, const ProdigyParams& p);

/// Coefficient of variation of the self-inclusive neighborhood {k, k_1..k_{f-1}}.
/// With f = 1 the neighborhood is a singleton; every score is then 1.
std::vector<double> dissimilarity_scores(const GradientSet& g, const NeighborOrder& order,
                                         const ProdigyParams& p);

/// Full rule: composite = proximity * dissimilarity, zero every client at or
/// below the f-th smallest composite, then average with the surviving scores
/// as weights. Weighted sums run in ascending-composite order so that relabeling
/// clients does not change the floating-point result.
ProdigyResult prodigy_aggregate(const GradientSet& g, const ProdigyParams& p);

}  // namespace prodigy
