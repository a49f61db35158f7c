#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "prodigy/aggregators.hpp"
#include "prodigy/geometry.hpp"

namespace prodigy {

enum class AttackKind { None, ALIE, FOE, SignFlip, LabelFlip };

/// Config names: "none", "alie", "foe", "sign_flip", "label_flip".
std::string_view to_string(AttackKind kind);
std::optional<AttackKind> attack_kind_from_string(std::string_view name);

struct AttackSpec {
  AttackKind kind = AttackKind::None;
  double z = 1.0;     // ALIE
  double eps = 0.1;   // FOE
  /// Grid search over the attack magnitude (ALIE and FOE only).
  bool search = true;

  /// e.g. "alie", "foe(100)".
  std::string label() const;
  void validate() const;
};

struct HonestSummary {
  Vector mean;
  /// Per-coordinate population standard deviation.
  Vector std;
};

HonestSummary honest_summary(const GradientSet& honest);

/// {0.25z, 0.5z, ..., c*z} with c the largest multiple of 0.25 such that c*z <= 2.
/// When even 0.25z exceeds 2 the grid is the single value min(0.25z, 2).
std::vector<double> alie_candidates(double z);
/// {0.1eps, 0.2eps, ..., eps}.
std::vector<double> foe_candidates(double eps);

/// Read-only view of the server's rule, state already bound.
using DefenseFn = std::function<AggregateResult(const GradientSet&)>;

/// Combines two disjoint GradientSets and orders the result by client id.
GradientSet merge_by_client_id(const GradientSet& a, const GradientSet& b);

/// ||defense(honest + f copies of `malicious`) - mu_H||, or -inf when the
/// defense reports a degenerate round.
double attack_deviation(const DefenseFn& defense, const GradientSet& honest,
                        std::span<const int> byz_clients, const Vector& malicious,
                        const Vector& honest_mean);

struct CraftedAttack {
  /// One vector per Byzantine client, ids as given.
  GradientSet updates;
  /// Selected z* (ALIE) or eps* (FOE); unset for the other kinds.
  std::optional<double> scale;
  /// Objective value of the selected grid point (searched attacks only).
  std::optional<double> deviation;
};

/// Builds this round's Byzantine updates. ALIE and FOE read the honest updates
/// and, when searching, probe `defense`; SignFlip negates `byz_local`; LabelFlip
/// and None forward `byz_local` (computed on flipped or clean labels by the caller).
CraftedAttack craft_attack(const AttackSpec& spec, const GradientSet& honest,
                           std::span<const int> byz_clients, const DefenseFn& defense,
                           const std::optional<GradientSet>& byz_local = std::nullopt);

}  // namespace prodigy
