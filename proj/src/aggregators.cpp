#include "prodigy/aggregators.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <utility>

#include "prodigy/errors.hpp"

namespace prodigy {

namespace {

constexpr std::array<std::pair<AggregatorKind, std::string_view>, 7> kKindNames{{
    {AggregatorKind::Average, "average"},
    {AggregatorKind::Median, "median"},
    {AggregatorKind::TrimmedMean, "trimmed_mean"},
    {AggregatorKind::GeoMed, "geomed"},
    {AggregatorKind::Krum, "krum"},
    {AggregatorKind::CClip, "cclip"},
    {AggregatorKind::Prodigy, "prodigy"},
}};

std::vector<double> column(const GradientSet& g, std::size_t c) {
  std::vector<double> col(g.size());
  for (std::size_t k = 0; k < g.size(); ++k) col[k] = g[k][c];
  return col;
}

}  // namespace

std::string_view to_string(AggregatorKind kind) {
  for (const auto& [k, name] : kKindNames)
    if (k == kind) return name;
  return "unknown";
}

std::optional<AggregatorKind> aggregator_kind_from_string(std::string_view name) {
  for (const auto& [k, n] : kKindNames)
    if (n == name) return k;
  return std::nullopt;
}

std::string AggregatorSpec::label() const {
  std::string out(to_string(kind));
  if (nnm_enabled) out += "+nnm";
  return out;
}

Vector average(const GradientSet& g) {
  Vector out(g.dim(), 0.0);
  for (const Vector& v : g.vectors())
    for (std::size_t i = 0; i < v.size(); ++i) out[i] += v[i];
  const double n = static_cast<double>(g.size());
  for (double& x : out) x /= n;
  return out;
}

Vector coordinate_median(const GradientSet& g) {
  const std::size_t n = g.size();
  Vector out(g.dim());
  for (std::size_t c = 0; c < g.dim(); ++c) {
    auto col = column(g, c);
    std::sort(col.begin(), col.end());
    out[c] = n % 2 == 1 ? col[n / 2] : 0.5 * (col[n / 2 - 1] + col[n / 2]);
  }
  return out;
}

Vector trimmed_mean(const GradientSet& g, std::size_t q) {
  const std::size_t n = g.size();
  if (2 * q >= n)
    throw InvalidInput("trimmed_mean: need N - 2q >= 1, got N=" + std::to_string(n) +
                       ", q=" + std::to_string(q));
  if (q == 0) return average(g);
  const double kept = static_cast<double>(n - 2 * q);
  Vector out(g.dim());
  for (std::size_t c = 0; c < g.dim(); ++c) {
    auto col = column(g, c);
    std::sort(col.begin(), col.end());
    double acc = 0.0;
    for (std::size_t i = q; i < n - q; ++i) acc += col[i];
    out[c] = acc / kept;
  }
  return out;
}

Vector geometric_median(const GradientSet& g, double nu, int rounds) {
  if (!(nu > 0.0)) throw InvalidInput("geometric_median: nu must be > 0");
  if (rounds < 1) throw InvalidInput("geometric_median: rounds must be >= 1");
  Vector v = average(g);
  std::vector<double> weights(g.size());
  for (int r = 0; r < rounds; ++r) {
    double total = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) {
      weights[k] = 1.0 / std::max(nu, std::sqrt(squared_distance(v, g[k])));
      total += weights[k];
    }
    Vector next(g.dim(), 0.0);
    for (std::size_t k = 0; k < g.size(); ++k)
      for (std::size_t i = 0; i < next.size(); ++i) next[i] += weights[k] * g[k][i];
    for (double& x : next) x /= total;
    v = std::move(next);
  }
  return v;
}

std::vector<double> krum_scores(const GradientSet& g, std::size_t f) {
  const std::size_t n = g.size();
  if (n < f + 3)
    throw InvalidInput("krum: need N >= f + 3, got N=" + std::to_string(n) +
                       ", f=" + std::to_string(f));
  const auto order = neighbor_order(pairwise_sq_distances(g));
  const std::size_t neighbors = n - f - 2;
  std::vector<double> scores(n, 0.0);
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < neighbors; ++i) scores[k] += order.distances[k][i];
  return scores;
}

Vector krum(const GradientSet& g, std::size_t f) {
  const auto scores = krum_scores(g, f);
  const auto best = std::min_element(scores.begin(), scores.end());
  return g[static_cast<std::size_t>(best - scores.begin())];
}

Vector centered_clip(const GradientSet& g, const AggregatorState& state, double tau, int iters) {
  if (!(tau > 0.0)) throw InvalidInput("centered_clip: tau must be > 0");
  if (iters < 1) throw InvalidInput("centered_clip: iters must be >= 1");
  Vector center = state.prev_aggregate.value_or(Vector(g.dim(), 0.0));
  if (center.size() != g.dim()) throw InvalidInput("centered_clip: state dimension mismatch");
  const double inv_n = 1.0 / static_cast<double>(g.size());
  Vector step(g.dim());
  for (int l = 0; l < iters; ++l) {
    std::fill(step.begin(), step.end(), 0.0);
    for (const Vector& v : g.vectors()) {
      const double dist = std::sqrt(squared_distance(v, center));
      if (dist == 0.0) continue;
      const double scale = std::min(1.0, tau / dist);
      for (std::size_t i = 0; i < step.size(); ++i) step[i] += (v[i] - center[i]) * scale;
    }
    for (std::size_t i = 0; i < step.size(); ++i) center[i] += inv_n * step[i];
  }
  return center;
}

GradientSet nnm_mix(const GradientSet& g, std::size_t f) {
  const std::size_t n = g.size();
  if (f >= n) throw InvalidInput("nnm_mix: need N - f >= 1");
  const auto order = neighbor_order(pairwise_sq_distances(g));
  const std::size_t neighbors = n - f - 1;
  const double inv = 1.0 / static_cast<double>(n - f);
  std::vector<Vector> mixed;
  mixed.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    Vector acc = g[k];
    for (std::size_t i = 0; i < neighbors; ++i) {
      const Vector& v = g[order.neighbors[k][i]];
      for (std::size_t c = 0; c < acc.size(); ++c) acc[c] += v[c];
    }
    for (double& x : acc) x *= inv;
    mixed.push_back(std::move(acc));
  }
  return GradientSet(std::move(mixed), g.client_ids());
}

Aggregator::Aggregator(AggregatorSpec spec, std::size_t n_byzantine)
    : spec_(std::move(spec)), f_(n_byzantine) {}

void Aggregator::check_compatible(std::size_t n) const {
  const std::string who = spec_.label();
  if (spec_.nnm_enabled && f_ >= n) throw InvalidInput(who + ": NNM needs N - f >= 1");
  switch (spec_.kind) {
    case AggregatorKind::Average:
    case AggregatorKind::Median:
      break;
    case AggregatorKind::TrimmedMean: {
      const std::size_t q = spec_.trim_q.value_or(f_);
      if (2 * q >= n)
        throw InvalidInput(who + ": need N - 2q >= 1, got N=" + std::to_string(n) +
                           ", q=" + std::to_string(q));
      break;
    }
    case AggregatorKind::GeoMed:
      if (!(spec_.weiszfeld_nu > 0.0) || spec_.weiszfeld_rounds < 1)
        throw InvalidInput(who + ": need nu > 0 and rounds >= 1");
      break;
    case AggregatorKind::Krum:
      if (n < f_ + 3) throw InvalidInput(who + ": need N >= f + 3");
      break;
    case AggregatorKind::CClip:
      if (!(spec_.clip_tau > 0.0) || spec_.clip_iters < 1)
        throw InvalidInput(who + ": need tau > 0 and iters >= 1");
      break;
    case AggregatorKind::Prodigy:
      ProdigyParams{n, f_, spec_.epsilon_guard}.validate();
      break;
  }
}

AggregateResult Aggregator::operator()(const GradientSet& g, const AggregatorState& state) const {
  if (spec_.nnm_enabled) return apply_rule(nnm_mix(g, f_), state);
  return apply_rule(g, state);
}

AggregateResult Aggregator::apply_rule(const GradientSet& g, const AggregatorState& state) const {
  AggregateResult out;
  switch (spec_.kind) {
    case AggregatorKind::Average:
      out.value = average(g);
      break;
    case AggregatorKind::Median:
      out.value = coordinate_median(g);
      break;
    case AggregatorKind::TrimmedMean:
      out.value = trimmed_mean(g, spec_.trim_q.value_or(f_));
      break;
    case AggregatorKind::GeoMed:
      out.value = geometric_median(g, spec_.weiszfeld_nu, spec_.weiszfeld_rounds);
      break;
    case AggregatorKind::Krum:
      out.value = krum(g, f_);
      break;
    case AggregatorKind::CClip:
      out.value = centered_clip(g, state, spec_.clip_tau, spec_.clip_iters);
      break;
    case AggregatorKind::Prodigy: {
      auto r = prodigy_aggregate(g, ProdigyParams{g.size(), f_, spec_.epsilon_guard});
      out.value = std::move(r.aggregate);
      out.degenerate = r.degenerate;
      out.scores = std::move(r.scores);
      break;
    }
  }
  return out;
}

}  // namespace prodigy
