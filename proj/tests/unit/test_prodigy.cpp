#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "helpers.hpp"
#include "prodigy/errors.hpp"
#include "prodigy/prodigy.hpp"
#include "verification/properties.hpp"

using namespace prodigy;
using testing::scalars;

namespace {

const ProdigyParams kFiveTwo{5, 2, 1e-12};

// A deliberately broken variant of the rule, for checking that the property
// suite notices. `shift` moves the proximity window; `geq` flips the
// threshold comparison.
ProdigyResult mutant(const GradientSet& g, const ProdigyParams& p, int shift, bool geq) {
  const std::size_t n = g.size(), f = p.n_byzantine;
  const auto order = neighbor_order(pairwise_sq_distances(g));
  const auto sd = dissimilarity_scores(g, order, p);
  ProdigyResult r;
  r.scores.proximity.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    double sum = 0.0;
    for (std::size_t i = f + shift; i <= n - f - 1 + shift && i <= n - 1; ++i)
      sum += order.distances[k][i - 1];
    r.scores.proximity[k] = 1.0 / (sum + p.epsilon_guard);
  }
  r.scores.dissimilarity = sd;
  r.scores.composite.resize(n);
  for (std::size_t k = 0; k < n; ++k) r.scores.composite[k] = r.scores.proximity[k] * sd[k];
  std::vector<std::size_t> rank(n);
  std::iota(rank.begin(), rank.end(), 0);
  std::stable_sort(rank.begin(), rank.end(), [&](auto a, auto b) {
    return r.scores.composite[a] < r.scores.composite[b];
  });
  r.scores.threshold = r.scores.composite[rank[f - 1]];
  r.scores.final.resize(n);
  r.aggregate.assign(g.dim(), 0.0);
  double total = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double c = r.scores.composite[k];
    const bool drop = geq ? c >= r.scores.threshold : c <= r.scores.threshold;
    r.scores.final[k] = drop ? 0.0 : c;
    total += r.scores.final[k];
    for (std::size_t i = 0; i < g.dim(); ++i) r.aggregate[i] += r.scores.final[k] * g[k][i];
  }
  r.degenerate = total == 0.0;
  for (double& x : r.aggregate) x = r.degenerate ? 0.0 : x / total;
  return r;
}

}  // namespace

TEST_CASE("proximity scores of [0,1,2,3,10], f=2") {
  const auto g = scalars({0, 1, 2, 3, 10});
  const auto sp = proximity_scores(neighbor_order(pairwise_sq_distances(g)), kFiveTwo);
  const double expected[] = {1.0 / 4, 1.0, 1.0, 1.0 / 4, 1.0 / 64};
  for (int k = 0; k < 5; ++k) CHECK(sp[k] == doctest::Approx(expected[k]).epsilon(1e-10));
}

TEST_CASE("dissimilarity scores of [0,1,2,3,10], f=2") {
  const auto g = scalars({0, 1, 2, 3, 10});
  const auto sd = dissimilarity_scores(g, neighbor_order(pairwise_sq_distances(g)), kFiveTwo);
  CHECK(sd[0] == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(sd[1] == doctest::Approx(1.0).epsilon(1e-10));  // tie at distance 1 resolves to client 0
  CHECK(sd[2] == doctest::Approx(1.0 / 3).epsilon(1e-10));
  CHECK(sd[3] == doctest::Approx(0.2).epsilon(1e-10));
  CHECK(sd[4] == doctest::Approx(7.0 / 13).epsilon(1e-10));
}

TEST_CASE("full rule on [0,1,2,3,10], f=2") {
  const auto r = prodigy_aggregate(scalars({0, 1, 2, 3, 10}), kFiveTwo);
  const double composite[] = {1.0 / 4, 1.0, 1.0 / 3, 1.0 / 20, 7.0 / 832};
  for (int k = 0; k < 5; ++k)
    CHECK(r.scores.composite[k] == doctest::Approx(composite[k]).epsilon(1e-10));
  CHECK(r.scores.threshold == doctest::Approx(1.0 / 20).epsilon(1e-10));
  CHECK(r.scores.final[3] == 0.0);
  CHECK(r.scores.final[4] == 0.0);
  CHECK(r.scores.final[0] == r.scores.composite[0]);
  CHECK_FALSE(r.degenerate);
  CHECK(r.aggregate[0] == doctest::Approx(20.0 / 19).epsilon(1e-12));
}

TEST_CASE("identical updates") {
  const auto g = scalars({2, 2, 2, 2, 2});
  const auto order = neighbor_order(pairwise_sq_distances(g));
  for (double s : proximity_scores(order, kFiveTwo)) CHECK(s == doctest::Approx(1e12));
  for (double s : dissimilarity_scores(g, order, kFiveTwo)) CHECK(s == 0.0);

  // Every composite ties at zero, the <= rule removes everyone.
  const auto r = prodigy_aggregate(g, kFiveTwo);
  CHECK(r.degenerate);
  CHECK(r.aggregate == Vector{0.0});
  CHECK(std::count(r.scores.final.begin(), r.scores.final.end(), 0.0) == 5);
}

TEST_CASE("scaling inputs by c") {
  const auto g = scalars({0, 1, 2, 3, 10});
  const auto g3 = scalars({0, 3, 6, 9, 30});
  const auto o = neighbor_order(pairwise_sq_distances(g));
  const auto o3 = neighbor_order(pairwise_sq_distances(g3));
  const auto sp = proximity_scores(o, kFiveTwo), sp3 = proximity_scores(o3, kFiveTwo);
  const auto sd = dissimilarity_scores(g, o, kFiveTwo), sd3 = dissimilarity_scores(g3, o3, kFiveTwo);
  for (int k = 0; k < 5; ++k) {
    CHECK(sp3[k] == doctest::Approx(sp[k] / 9).epsilon(1e-9));
    CHECK(sd3[k] == doctest::Approx(sd[k]).epsilon(1e-9));
  }
  CHECK(prodigy_aggregate(g3, kFiveTwo).aggregate[0] ==
        doctest::Approx(3 * prodigy_aggregate(g, kFiveTwo).aggregate[0]).epsilon(1e-12));
}

TEST_CASE("neighborhood of identical vectors has zero dissimilarity") {
  const auto g = scalars({1, 1, 5, 9, 20});
  const auto sd = dissimilarity_scores(g, neighbor_order(pairwise_sq_distances(g)), kFiveTwo);
  CHECK(sd[0] == 0.0);
  CHECK(sd[1] == 0.0);
  CHECK(sd[2] > 0.0);
}

TEST_CASE("f = 1 keeps the proximity part only") {
  const auto g = scalars({0, 1, 2, 7});
  const ProdigyParams p{4, 1, 1e-12};
  const auto r = prodigy_aggregate(g, p);
  for (double s : r.scores.dissimilarity) CHECK(s == 1.0);
  CHECK(r.scores.composite == r.scores.proximity);
  CHECK(std::count(r.scores.final.begin(), r.scores.final.end(), 0.0) == 1);
  CHECK(r.scores.final[3] == 0.0);
}

TEST_CASE("composite ties at the threshold zero more than f clients") {
  // Clients 0 and 1 are mirror images, so they tie on every score.
  const auto r = prodigy_aggregate(scalars({-10, 10, -1, 0, 1}), {5, 1, 1e-12});
  CHECK(r.scores.composite[0] == r.scores.composite[1]);
  CHECK(std::count(r.scores.final.begin(), r.scores.final.end(), 0.0) == 2);
}

TEST_CASE("parameter validation") {
  const auto g = scalars({0, 1, 2, 3, 10});
  CHECK_THROWS_AS(prodigy_aggregate(g, {5, 0, 1e-12}), InvalidInput);
  CHECK_THROWS_AS(prodigy_aggregate(g, {5, 3, 1e-12}), InvalidInput);
  CHECK_THROWS_AS(prodigy_aggregate(g, {6, 2, 1e-12}), InvalidInput);
  CHECK_THROWS_AS(prodigy_aggregate(g, {5, 2, 0.0}), InvalidInput);
  CHECK_THROWS_AS((ProdigyParams{4, 2, 1e-12}.validate()), InvalidInput);
  CHECK_NOTHROW((ProdigyParams{5, 2, 1e-12}.validate()));
}

TEST_CASE("property suite passes on the library") {
  using namespace prodigy::verification;
  for (const auto& r : {check_prodigy_oracle(100, 31), check_exact_f_filtering(1000, 32),
                        check_convex_combination(300, 33), check_homogeneity(300, 34),
                        check_permutation_equivariance(300, 35)}) {
    INFO(format_line(r));
    CHECK(r.passed);
  }
}

TEST_CASE("property suite catches an unmutated reimplementation as correct") {
  const verification::ProdigyImpl same = [](const GradientSet& g, const ProdigyParams& p) {
    return mutant(g, p, 0, false);
  };
  CHECK(verification::check_prodigy_oracle(50, 36, same).passed);
}

TEST_CASE("mutation: off-by-one proximity window is detected") {
  for (int shift : {-1, 1}) {
    const verification::ProdigyImpl bad = [shift](const GradientSet& g, const ProdigyParams& p) {
      return mutant(g, p, shift, false);
    };
    const auto oracle = verification::check_prodigy_oracle(50, 37, bad);
    const auto filtering = verification::check_exact_f_filtering(500, 38, bad);
    INFO("shift " << shift << ": " << oracle.detail << " / " << filtering.detail);
    CHECK_FALSE((oracle.passed && filtering.passed));
  }
}

TEST_CASE("mutation: >= in the threshold test is detected") {
  const verification::ProdigyImpl bad = [](const GradientSet& g, const ProdigyParams& p) {
    return mutant(g, p, 0, true);
  };
  const auto r = verification::check_prodigy_oracle(50, 39, bad);
  INFO(r.detail);
  CHECK_FALSE(r.passed);
}
