#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

#include "prodigy/geometry.hpp"
#include "prodigy/prodigy.hpp"

namespace prodigy {

enum class AggregatorKind { Average, Median, TrimmedMean, GeoMed, Krum, CClip, Prodigy };

/// Config names: "average", "median", "trimmed_mean", "geomed", "krum", "cclip", "prodigy".
std::string_view to_string(AggregatorKind kind);
std::optional<AggregatorKind> aggregator_kind_from_string(std::string_view name);

struct AggregatorSpec {
  AggregatorKind kind = AggregatorKind::Average;
  /// Trimmed mean cut per side; unset means q = f.
  std::optional<std::size_t> trim_q;
  double weiszfeld_nu = 0.1;
  int weiszfeld_rounds = 3;
  double clip_tau = 10.0;
  int clip_iters = 3;
  bool nnm_enabled = false;
  double epsilon_guard = 1e-12;

  /// e.g. "krum" or "median+nnm".
  std::string label() const;
};

/// Cross-round memory. Only centered clipping reads it.
struct AggregatorState {
  std::optional<Vector> prev_aggregate;
};

struct AggregateResult {
  Vector value;
  /// No client survived filtering; `value` is the zero vector and the caller
  /// should skip the model step.
  bool degenerate = false;
  /// Present when the rule is ProDiGy.
  std::optional<TrustScores> scores;
};

Vector average(const GradientSet& g);
/// Even N takes the midpoint of the two central order statistics.
Vector coordinate_median(const GradientSet& g);
Vector trimmed_mean(const GradientSet& g, std::size_t q);
/// Smoothed Weiszfeld iterations started from the arithmetic mean.
Vector geometric_median(const GradientSet& g, double nu, int rounds);
/// Returns the vector of the client minimizing the sum of squared distances to
/// its N-f-2 nearest neighbors. Score ties go to the lower position.
Vector krum(const GradientSet& g, std::size_t f);
std::vector<double> krum_scores(const GradientSet& g, std::size_t f);
/// Starts from state.prev_aggregate, or the zero vector when absent.
Vector centered_clip(const GradientSet& g, const AggregatorState& state, double tau, int iters);
/// Replaces each vector with the mean of itself and its N-f-1 nearest neighbors.
GradientSet nnm_mix(const GradientSet& g, std::size_t f);

/// One configured rule (optionally NNM-prefixed) behind a uniform call.
class Aggregator {
 public:
  Aggregator(AggregatorSpec spec, std::size_t n_byzantine);

  AggregateResult operator()(const GradientSet& g, const AggregatorState& state) const;

  const AggregatorSpec& spec() const { return spec_; }
  std::size_t n_byzantine() const { return f_; }

  /// Throws InvalidInput when the rule's parameter constraints fail for N clients.
  void check_compatible(std::size_t n_clients) const;

 private:
  AggregateResult apply_rule(const GradientSet& g, const AggregatorState& state) const;

  AggregatorSpec spec_;
  std::size_t f_;
};

}  // namespace prodigy
