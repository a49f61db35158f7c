#include "prodigy/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "prodigy/errors.hpp"
#include "prodigy/rng.hpp"

namespace prodigy {

std::string_view to_string(ModelKind kind) {
  return kind == ModelKind::SoftmaxLinear ? "softmax" : "mlp";
}

std::optional<ModelKind> model_kind_from_string(std::string_view name) {
  if (name == "softmax") return ModelKind::SoftmaxLinear;
  if (name == "mlp") return ModelKind::MLP;
  return std::nullopt;
}

std::size_t ModelSpec::param_count() const {
  const auto p = input_dim;
  const auto c = static_cast<std::size_t>(n_classes);
  if (kind == ModelKind::SoftmaxLinear) return (p + 1) * c;
  return (p + 1) * hidden + (hidden + 1) * c;
}

void ModelSpec::validate() const {
  if (input_dim < 1) throw InvalidInput("model: input_dim must be >= 1");
  if (n_classes < 2) throw InvalidInput("model: n_classes must be >= 2");
  if (kind == ModelKind::MLP && hidden < 1) throw InvalidInput("model: hidden must be >= 1");
  if (!(l2_reg >= 0.0)) throw InvalidInput("model: l2_reg must be >= 0");
}

namespace {

// Offsets of the parameter blocks.
struct Layout {
  std::size_t p, c, h;
  std::size_t w1, b1, w2, b2;

  explicit Layout(const ModelSpec& s)
      : p(s.input_dim), c(static_cast<std::size_t>(s.n_classes)),
        h(s.kind == ModelKind::MLP ? s.hidden : 0) {
    if (s.kind == ModelKind::SoftmaxLinear) {
      w1 = 0;
      b1 = c * p;
      w2 = b2 = b1 + c;
    } else {
      w1 = 0;
      b1 = h * p;
      w2 = b1 + h;
      b2 = w2 + c * h;
    }
  }
};

void check_theta(const ModelSpec& spec, std::span<const double> theta) {
  if (theta.size() != spec.param_count())
    throw InvalidInput("model: theta has " + std::to_string(theta.size()) +
                       " entries, expected " + std::to_string(spec.param_count()));
}

// y = W x + b for a row-major W[rows x cols].
void affine(std::span<const double> w, std::span<const double> b, std::span<const double> x,
            std::span<double> y) {
  const std::size_t cols = x.size();
  for (std::size_t r = 0; r < y.size(); ++r) {
    double acc = b[r];
    const double* row = w.data() + r * cols;
    for (std::size_t j = 0; j < cols; ++j) acc += row[j] * x[j];
    y[r] = acc;
  }
}

struct Forward {
  Vector hidden;  // MLP only
  Vector logits;
};

Forward forward(const ModelSpec& spec, const Layout& l, std::span<const double> theta,
                std::span<const double> x) {
  if (x.size() != l.p) throw InvalidInput("model: feature dimension mismatch");
  Forward out;
  out.logits.resize(l.c);
  if (spec.kind == ModelKind::SoftmaxLinear) {
    affine(theta.subspan(l.w1, l.c * l.p), theta.subspan(l.b1, l.c), x, out.logits);
  } else {
    out.hidden.resize(l.h);
    affine(theta.subspan(l.w1, l.h * l.p), theta.subspan(l.b1, l.h), x, out.hidden);
    for (double& a : out.hidden) a = std::max(a, 0.0);
    affine(theta.subspan(l.w2, l.c * l.h), theta.subspan(l.b2, l.c), out.hidden, out.logits);
  }
  for (double z : out.logits)
    if (!std::isfinite(z)) throw NumericError("model: non-finite logit (parameters diverged?)");
  return out;
}

double log_sum_exp(std::span<const double> z) {
  const double m = *std::max_element(z.begin(), z.end());
  double acc = 0.0;
  for (double v : z) acc += std::exp(v - m);
  return m + std::log(acc);
}

double sq_norm(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return acc;
}

}  // namespace

Vector init_params(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  const Layout l(spec);
  Vector theta(spec.param_count(), 0.0);
  auto rng = make_rng({seed, 0x696e6974ULL});
  std::normal_distribution<double> normal(0.0, 1.0);
  if (spec.kind == ModelKind::SoftmaxLinear) {
    for (std::size_t i = 0; i < l.c * l.p; ++i) theta[l.w1 + i] = 0.01 * normal(rng);
  } else {
    const double s1 = 1.0 / std::sqrt(static_cast<double>(l.p));
    const double s2 = 1.0 / std::sqrt(static_cast<double>(l.h));
    for (std::size_t i = 0; i < l.h * l.p; ++i) theta[l.w1 + i] = s1 * normal(rng);
    for (std::size_t i = 0; i < l.c * l.h; ++i) theta[l.w2 + i] = s2 * normal(rng);
  }
  return theta;
}

Vector logits(const ModelSpec& spec, std::span<const double> theta, std::span<const double> x) {
  check_theta(spec, theta);
  return forward(spec, Layout(spec), theta, x).logits;
}

double model_loss(const ModelSpec& spec, std::span<const double> theta,
                  const LabeledDataset& batch) {
  check_theta(spec, theta);
  if (batch.empty()) throw InvalidInput("model_loss: empty batch");
  const Layout l(spec);
  double ce = 0.0;
  for (std::size_t s = 0; s < batch.size(); ++s) {
    const auto fw = forward(spec, l, theta, batch.features[s]);
    ce += log_sum_exp(fw.logits) - fw.logits[static_cast<std::size_t>(batch.labels[s])];
  }
  return ce / static_cast<double>(batch.size()) + 0.5 * spec.l2_reg * sq_norm(theta);
}

Vector model_gradient(const ModelSpec& spec, std::span<const double> theta,
                      const LabeledDataset& batch) {
  check_theta(spec, theta);
  if (batch.empty()) throw InvalidInput("model_gradient: empty batch");
  const Layout l(spec);
  Vector grad(theta.size(), 0.0);
  Vector dlogits(l.c);
  Vector dhidden(l.h);
  const double inv_b = 1.0 / static_cast<double>(batch.size());

  for (std::size_t s = 0; s < batch.size(); ++s) {
    const auto& x = batch.features[s];
    const auto fw = forward(spec, l, theta, x);
    const double lse = log_sum_exp(fw.logits);
    for (std::size_t c = 0; c < l.c; ++c) dlogits[c] = std::exp(fw.logits[c] - lse) * inv_b;
    dlogits[static_cast<std::size_t>(batch.labels[s])] -= inv_b;

    if (spec.kind == ModelKind::SoftmaxLinear) {
      for (std::size_t c = 0; c < l.c; ++c) {
        double* row = grad.data() + l.w1 + c * l.p;
        for (std::size_t j = 0; j < l.p; ++j) row[j] += dlogits[c] * x[j];
        grad[l.b1 + c] += dlogits[c];
      }
      continue;
    }

    std::fill(dhidden.begin(), dhidden.end(), 0.0);
    for (std::size_t c = 0; c < l.c; ++c) {
      double* grow = grad.data() + l.w2 + c * l.h;
      const double* wrow = theta.data() + l.w2 + c * l.h;
      for (std::size_t j = 0; j < l.h; ++j) {
        grow[j] += dlogits[c] * fw.hidden[j];
        dhidden[j] += dlogits[c] * wrow[j];
      }
      grad[l.b2 + c] += dlogits[c];
    }
    for (std::size_t j = 0; j < l.h; ++j) {
      const double dpre = fw.hidden[j] > 0.0 ? dhidden[j] : 0.0;
      double* row = grad.data() + l.w1 + j * l.p;
      for (std::size_t i = 0; i < l.p; ++i) row[i] += dpre * x[i];
      grad[l.b1 + j] += dpre;
    }
  }
  for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += spec.l2_reg * theta[i];
  return grad;
}

Evaluation evaluate(const ModelSpec& spec, std::span<const double> theta,
                    const LabeledDataset& test) {
  check_theta(spec, theta);
  if (test.empty()) throw InvalidInput("evaluate: empty test set");
  const Layout l(spec);
  std::size_t correct = 0;
  double ce = 0.0;
  for (std::size_t s = 0; s < test.size(); ++s) {
    const auto fw = forward(spec, l, theta, test.features[s]);
    const auto best = std::max_element(fw.logits.begin(), fw.logits.end());
    const auto y = static_cast<std::size_t>(test.labels[s]);
    if (static_cast<std::size_t>(best - fw.logits.begin()) == y) ++correct;
    ce += log_sum_exp(fw.logits) - fw.logits[y];
  }
  const double n = static_cast<double>(test.size());
  return {static_cast<double>(correct) / n, ce / n};
}

}  // namespace prodigy
