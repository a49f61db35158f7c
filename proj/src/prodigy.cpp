#include "prodigy/prodigy.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "prodigy/errors.hpp"

namespace prodigy {

void ProdigyParams::validate() const {
  if (n_byzantine < 1 || 2 * n_byzantine >= n_clients)
    throw InvalidInput("ProdigyParams: need 1 <= f < N/2, got N=" + std::to_string(n_clients) +
                       ", f=" + std::to_string(n_byzantine));
  if (!(epsilon_guard > 0.0)) throw InvalidInput("ProdigyParams: epsilon_guard must be > 0");
}

namespace {

void check_size(std::size_t actual, const ProdigyParams& p, const char* who) {
  if (actual != p.n_clients)
    throw InvalidInput(std::string(who) + ": expected " + std::to_string(p.n_clients) +
                       " clients, got " + std::to_string(actual));
}

}  // namespace

std::vector<double> proximity_scores(const NeighborOrder& order, const ProdigyParams& p) {
  p.validate();
  check_size(order.size(), p, "proximity_scores");
  const std::size_t n = p.n_clients;
  const std::size_t f = p.n_byzantine;
  std::vector<double> scores(n);
  for (std::size_t k = 0; k < n; ++k) {
    const auto& dists = order.distances[k];
    // 1-based ranks f..N-f-1 are 0-based slots f-1..N-f-2.
    double window = 0.0;
    for (std::size_t i = f - 1; i <= n - f - 2; ++i) window += dists[i];
    scores[k] = 1.0 / (window + p.epsilon_guard);
  }
  return scores;
}

std::vector<double> dissimilarity_scores(const GradientSet& g, const NeighborOrder& order,
                                         const ProdigyParams& p) {
  p.validate();
  check_size(g.size(), p, "dissimilarity_scores");
  check_size(order.size(), p, "dissimilarity_scores");
  const std::size_t n = p.n_clients;
  const std::size_t f = p.n_byzantine;
  std::vector<double> scores(n, 1.0);
  if (f == 1) return scores;

  std::vector<std::size_t> members(f);
  for (std::size_t k = 0; k < n; ++k) {
    members[0] = k;
    std::copy_n(order.neighbors[k].begin(), f - 1, members.begin() + 1);
    const auto stats = vector_set_stats(g, members);
    scores[k] = stats.spread / (norm(stats.mean) + p.epsilon_guard);
  }
  return scores;
}

ProdigyResult prodigy_aggregate(const GradientSet& g, const ProdigyParams& p) {
  p.validate();
  check_size(g.size(), p, "prodigy_aggregate");
  const std::size_t n = p.n_clients;
  const std::size_t f = p.n_byzantine;

  const auto order = neighbor_order(pairwise_sq_distances(g));
  ProdigyResult out;
  TrustScores& s = out.scores;
  s.proximity = proximity_scores(order, p);
  s.dissimilarity = dissimilarity_scores(g, order, p);
  s.composite.resize(n);
  for (std::size_t k = 0; k < n; ++k) s.composite[k] = s.proximity[k] * s.dissimilarity[k];

  std::vector<std::size_t> rank(n);
  std::iota(rank.begin(), rank.end(), 0);
  std::stable_sort(rank.begin(), rank.end(), [&](std::size_t a, std::size_t b) {
    return s.composite[a] < s.composite[b];
  });
  s.threshold = s.composite[rank[f - 1]];
  s.final.resize(n);
  for (std::size_t k = 0; k < n; ++k)
    s.final[k] = s.composite[k] <= s.threshold ? 0.0 : s.composite[k];

  out.aggregate.assign(g.dim(), 0.0);
  double total = 0.0;
  for (std::size_t k : rank) {
    const double w = s.final[k];
    if (w == 0.0) continue;
    total += w;
    const Vector& v = g[k];
    for (std::size_t i = 0; i < v.size(); ++i) out.aggregate[i] += w * v[i];
  }
  if (total == 0.0) {
    out.degenerate = true;
    std::fill(out.aggregate.begin(), out.aggregate.end(), 0.0);
    return out;
  }
  for (double& x : out.aggregate) x /= total;
  return out;
}

}  // namespace prodigy
