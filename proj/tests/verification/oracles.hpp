#pragma once

// Literal reference transcriptions used to check the library. Nothing here
// calls into prodigy_core, so a bug there cannot be mirrored here.

#include <cstddef>
#include <optional>
#include <vector>

namespace prodigy::oracle {

using Vec = std::vector<double>;
using Mat = std::vector<Vec>;

double sqdist(const Vec& a, const Vec& b);
Mat distances(const Mat& g);

/// Other clients of k sorted by (distance, index).
std::vector<std::size_t> sorted_neighbors(const Mat& g, std::size_t k);

struct ProdigyOut {
  Vec aggregate;
  Vec proximity, dissimilarity, composite, final;
  double threshold = 0.0;
  bool degenerate = false;
};

ProdigyOut prodigy(const Mat& g, std::size_t f, double eps = 1e-12);

Vec average(const Mat& g);
Vec median(const Mat& g);
Vec trimmed_mean(const Mat& g, std::size_t q);
Vec geomed(const Mat& g, double nu, int rounds);
/// Scores by exhaustive search over all (N-f-2)-subsets of the other clients.
Vec krum_scores(const Mat& g, std::size_t f);
Vec krum(const Mat& g, std::size_t f);
Vec cclip(const Mat& g, const std::optional<Vec>& start, double tau, int iters);
Mat nnm(const Mat& g, std::size_t f);

/// ALIE multipliers by enumeration: 0.25*m*z for every m with 0.25*m*z <= 2.
Vec alie_grid(double z);
Vec foe_grid(double eps);

/// Cross-entropy loss (mean over rows) plus (l2/2)||theta||^2 for the two model
/// kinds, written against the documented parameter layout.
double softmax_loss(const Vec& theta, const Mat& x, const std::vector<int>& y, int classes,
                    double l2);
double mlp_loss(const Vec& theta, const Mat& x, const std::vector<int>& y, int classes,
                std::size_t hidden, double l2);

/// Central finite differences of `loss` at theta.
template <typename Loss>
Vec finite_difference(Loss&& loss, Vec theta, double step = 1e-5) {
  Vec grad(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double keep = theta[i];
    theta[i] = keep + step;
    const double up = loss(theta);
    theta[i] = keep - step;
    const double down = loss(theta);
    theta[i] = keep;
    grad[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

}  // namespace prodigy::oracle
