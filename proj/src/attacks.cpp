#include "prodigy/attacks.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>
#include <utility>

#include "prodigy/errors.hpp"

namespace prodigy {

namespace {

constexpr std::array<std::pair<AttackKind, std::string_view>, 5> kAttackNames{{
    {AttackKind::None, "none"},
    {AttackKind::ALIE, "alie"},
    {AttackKind::FOE, "foe"},
    {AttackKind::SignFlip, "sign_flip"},
    {AttackKind::LabelFlip, "label_flip"},
}};

GradientSet replicate(const Vector& v, std::span<const int> ids) {
  std::vector<Vector> copies(ids.size(), v);
  return GradientSet(std::move(copies), std::vector<int>(ids.begin(), ids.end()));
}

}  // namespace

std::string_view to_string(AttackKind kind) {
  for (const auto& [k, name] : kAttackNames)
    if (k == kind) return name;
  return "unknown";
}

std::optional<AttackKind> attack_kind_from_string(std::string_view name) {
  for (const auto& [k, n] : kAttackNames)
    if (n == name) return k;
  return std::nullopt;
}

std::string AttackSpec::label() const {
  std::ostringstream os;
  os << to_string(kind);
  if (kind == AttackKind::FOE) os << '(' << eps << ')';
  return os.str();
}

void AttackSpec::validate() const {
  if (kind == AttackKind::ALIE && !(z > 0.0)) throw InvalidInput("alie: z must be > 0");
  if (kind == AttackKind::FOE && !(eps > 0.0)) throw InvalidInput("foe: eps must be > 0");
}

HonestSummary honest_summary(const GradientSet& honest) {
  if (honest.empty()) throw InvalidInput("honest_summary: no honest clients");
  HonestSummary out;
  out.mean = average(honest);
  out.std.assign(honest.dim(), 0.0);
  for (const Vector& v : honest.vectors())
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double diff = v[i] - out.mean[i];
      out.std[i] += diff * diff;
    }
  const double n = static_cast<double>(honest.size());
  for (double& s : out.std) s = std::sqrt(s / n);
  return out;
}

std::vector<double> alie_candidates(double z) {
  if (!(z > 0.0)) throw InvalidInput("alie_candidates: z must be > 0");
  std::vector<double> grid;
  // 0.25 * m * z <= 2, written as m * z <= 8 to stay exact for the usual z.
  for (int m = 1; m * z <= 8.0 * (1.0 + 1e-12); ++m) grid.push_back(0.25 * m * z);
  if (grid.empty()) grid.push_back(std::min(0.25 * z, 2.0));
  return grid;
}

std::vector<double> foe_candidates(double eps) {
  if (!(eps > 0.0)) throw InvalidInput("foe_candidates: eps must be > 0");
  std::vector<double> grid;
  for (int m = 1; m <= 10; ++m) grid.push_back(eps * m / 10.0);
  return grid;
}

GradientSet merge_by_client_id(const GradientSet& a, const GradientSet& b) {
  std::vector<std::pair<int, const Vector*>> rows;
  rows.reserve(a.size() + b.size());
  for (const GradientSet* s : {&a, &b})
    for (std::size_t k = 0; k < s->size(); ++k) rows.emplace_back(s->client_ids()[k], &(*s)[k]);
  std::sort(rows.begin(), rows.end(),
            [](const auto& x, const auto& y) { return x.first < y.first; });
  std::vector<Vector> vectors;
  std::vector<int> ids;
  vectors.reserve(rows.size());
  ids.reserve(rows.size());
  for (const auto& [id, v] : rows) {
    ids.push_back(id);
    vectors.push_back(*v);
  }
  return GradientSet(std::move(vectors), std::move(ids));
}

double attack_deviation(const DefenseFn& defense, const GradientSet& honest,
                        std::span<const int> byz_clients, const Vector& malicious,
                        const Vector& honest_mean) {
  const auto result = defense(merge_by_client_id(honest, replicate(malicious, byz_clients)));
  if (result.degenerate) return -std::numeric_limits<double>::infinity();
  return std::sqrt(squared_distance(result.value, honest_mean));
}

CraftedAttack craft_attack(const AttackSpec& spec, const GradientSet& honest,
                           std::span<const int> byz_clients, const DefenseFn& defense,
                           const std::optional<GradientSet>& byz_local) {
  spec.validate();
  if (byz_clients.empty()) throw InvalidInput("craft_attack: no Byzantine clients");

  const auto needs_local = [&](const char* who) -> const GradientSet& {
    if (!byz_local) throw InvalidInput(std::string(who) + ": Byzantine local updates required");
    if (byz_local->size() != byz_clients.size())
      throw InvalidInput(std::string(who) + ": one local update per Byzantine client required");
    return *byz_local;
  };

  switch (spec.kind) {
    case AttackKind::None:
      return {needs_local("none"), std::nullopt, std::nullopt};
    case AttackKind::LabelFlip:
      return {needs_local("label_flip"), std::nullopt, std::nullopt};
    case AttackKind::SignFlip: {
      const GradientSet& local = needs_local("sign_flip");
      std::vector<Vector> flipped(local.vectors().begin(), local.vectors().end());
      for (Vector& v : flipped)
        for (double& x : v) x = -x;
      return {GradientSet(std::move(flipped), local.client_ids()), std::nullopt, std::nullopt};
    }
    case AttackKind::ALIE:
    case AttackKind::FOE:
      break;
  }

  const HonestSummary summary = honest_summary(honest);
  const bool alie = spec.kind == AttackKind::ALIE;
  const auto make = [&](double scale) {
    Vector v(summary.mean.size());
    for (std::size_t i = 0; i < v.size(); ++i)
      v[i] = alie ? summary.mean[i] - scale * summary.std[i] : -scale * summary.mean[i];
    return v;
  };

  if (!spec.search) {
    const double scale = alie ? spec.z : spec.eps;
    return {replicate(make(scale), byz_clients), scale, std::nullopt};
  }

  const auto grid = alie ? alie_candidates(spec.z) : foe_candidates(spec.eps);
  std::size_t best = 0;
  double best_dev = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double dev = attack_deviation(defense, honest, byz_clients, make(grid[i]), summary.mean);
    // Strict comparison keeps the smaller grid value on ties.
    if (dev > best_dev) {
      best_dev = dev;
      best = i;
    }
  }
  return {replicate(make(grid[best]), byz_clients), grid[best], best_dev};
}

}  // namespace prodigy
