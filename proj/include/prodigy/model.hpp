#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>

#include "prodigy/data.hpp"
#include "prodigy/geometry.hpp"

namespace prodigy {

enum class ModelKind { SoftmaxLinear, MLP };

std::string_view to_string(ModelKind kind);
std::optional<ModelKind> model_kind_from_string(std::string_view name);

/// Parameter layout (row-major blocks, in order):
///   SoftmaxLinear: W[C x p], b[C]
///   MLP:           W1[h x p], b1[h], W2[C x h], b2[C], hidden activation ReLU
struct ModelSpec {
  ModelKind kind = ModelKind::SoftmaxLinear;
  std::size_t input_dim = 0;
  int n_classes = 0;
  std::size_t hidden = 32;
  double l2_reg = 1e-2;

  std::size_t param_count() const;
  void validate() const;
};

struct Evaluation {
  double accuracy = 0.0;
  /// Mean cross-entropy, without the l2 term.
  double loss = 0.0;
};

/// Small random start: N(0, 0.01^2) for the linear model, fan-in scaled
/// weights and zero biases for the MLP.
Vector init_params(const ModelSpec& spec, std::uint64_t seed);

Vector logits(const ModelSpec& spec, std::span<const double> theta, std::span<const double> x);

/// Mean cross-entropy over the batch plus (l2_reg / 2) * ||theta||^2.
double model_loss(const ModelSpec& spec, std::span<const double> theta,
                  const LabeledDataset& batch);

/// Gradient of model_loss. Throws NumericError on non-finite logits.
Vector model_gradient(const ModelSpec& spec, std::span<const double> theta,
                      const LabeledDataset& batch);

/// Argmax accuracy (ties to the lowest class) and mean cross-entropy.
Evaluation evaluate(const ModelSpec& spec, std::span<const double> theta,
                    const LabeledDataset& test);

}  // namespace prodigy
