#include <doctest.h>

#include <set>

#include "prodigy/aggregators.hpp"
#include "prodigy/config.hpp"
#include "prodigy/engine.hpp"
#include "prodigy/errors.hpp"
#include "prodigy/rng.hpp"

using namespace prodigy;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.n_clients = 5;
  c.n_byzantine = 0;
  c.model.kind = ModelKind::SoftmaxLinear;
  c.model.l2_reg = 1e-3;
  c.data.n_classes = 4;
  c.data.dim = 6;
  c.data.per_class = 60;
  c.data.test_per_class = 50;
  c.data.separation = 4.0;
  c.data.partition = PartitionKind::IID;
  c.schedule.rounds = 30;
  c.schedule.batch_size = 8;
  c.eval_every = 5;
  c.defense.kind = AggregatorKind::Average;
  c.seed = 4;
  return c;
}

ClientState client_with(const LabeledDataset& shard, int id, std::uint64_t seed) {
  ClientState c;
  c.id = id;
  c.shard = shard;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("learning rate schedule") {
  TrainSchedule s;
  s.rounds = 2000;
  CHECK(lr_schedule(0, s) == 0.05);
  CHECK(lr_schedule(1000, s) == 0.05);
  CHECK(lr_schedule(1500, s) == 0.005);
  s.rounds = 300;
  CHECK(lr_schedule(200, s) == 0.05);
  CHECK(lr_schedule(201, s) == 0.005);
}

TEST_CASE("momentum") {
  ClientState c;
  CHECK(apply_momentum(c, {1.0, 2.0}, 0.9)[0] == doctest::Approx(0.1));
  CHECK(apply_momentum(c, {1.0, 2.0}, 0.9)[1] == doctest::Approx(0.9 * 0.2 + 0.2));
  ClientState fresh;
  CHECK(apply_momentum(fresh, {3.0}, 0.0) == Vector{3.0});
  CHECK(apply_momentum(fresh, {5.0}, 0.0) == Vector{5.0});
  CHECK_THROWS_AS(apply_momentum(fresh, {1.0}, 1.5), InvalidInput);
}

TEST_CASE("batch sampling") {
  auto rng = make_rng({1, 2});
  const auto b = sample_batches(10, 3, 4, rng);
  REQUIRE(b.size() == 3);
  // The first two batches come from one permutation and never overlap.
  std::set<std::size_t> first(b[0].begin(), b[0].end());
  for (auto i : b[1]) CHECK(first.count(i) == 0);
  for (const auto& batch : b) {
    CHECK(batch.size() == 4);
    CHECK(std::set<std::size_t>(batch.begin(), batch.end()).size() == 4);
    for (auto i : batch) CHECK(i < 10);
  }
  auto rng2 = make_rng({1, 2});
  CHECK(sample_batches(10, 3, 4, rng2) == b);
  CHECK_THROWS_AS(sample_batches(3, 1, 4, rng), InvalidInput);
}

TEST_CASE("client update") {
  const auto data = generate_blobs(3, 4, 20, 2.0, 1);
  ModelSpec spec;
  spec.input_dim = 4;
  spec.n_classes = 3;
  const auto theta = init_params(spec, 2);
  const auto client = client_with(data, 3, 9);
  TrainSchedule s;
  s.batch_size = 5;

  SUBCASE("one local step is the batch gradient") {
    auto rng = make_rng({9, 3, 7, kBatchSalt});
    const auto idx = sample_batches(data.size(), 1, 5, rng)[0];
    CHECK(client_update(spec, theta, client, s, 7) == model_gradient(spec, theta, data.subset(idx)));
    TrainSchedule half = s;
    half.gamma_hi /= 2;
    CHECK(client_update(spec, theta, client, half, 7) == client_update(spec, theta, client, s, 7));
  }
  SUBCASE("two local steps") {
    s.local_iters = 2;
    auto rng = make_rng({9, 3, 7, kBatchSalt});
    const auto idx = sample_batches(data.size(), 2, 5, rng);
    Vector th = theta;
    const auto g1 = model_gradient(spec, th, data.subset(idx[0]));
    for (std::size_t i = 0; i < th.size(); ++i) th[i] -= 0.05 * g1[i];
    const auto g2 = model_gradient(spec, th, data.subset(idx[1]));
    const auto u = client_update(spec, theta, client, s, 7);
    for (std::size_t i = 0; i < u.size(); ++i)
      CHECK(u[i] == doctest::Approx((theta[i] - (th[i] - 0.05 * g2[i])) / 0.05).epsilon(1e-9));
  }
}

TEST_CASE("zero rounds returns the initial parameters") {
  auto c = small_config();
  c.schedule.rounds = 0;
  const auto r = run_training(c);
  CHECK(r.records.empty());
  CHECK(r.theta == init_params(prepare_data(c).model, c.seed));
}

TEST_CASE("plain averaging matches an independent SGD loop") {
  const auto c = small_config();
  const auto data = prepare_data(c);
  Vector theta = init_params(data.model, c.seed);
  for (std::size_t t = 0; t < c.schedule.rounds; ++t) {
    Vector sum(theta.size(), 0.0);
    for (std::size_t k = 0; k < c.n_clients; ++k) {
      auto rng = make_rng({c.seed, k, t, kBatchSalt});
      const auto idx = sample_batches(data.shards[k].size(), 1, c.schedule.batch_size, rng)[0];
      const auto g = model_gradient(data.model, theta, data.shards[k].subset(idx));
      for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += g[i];
    }
    const double gamma = lr_schedule(t, c.schedule);
    for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= gamma * (sum[i] / 5.0);
  }
  CHECK(run_training(c).theta == theta);
}

TEST_CASE("IID blobs train to high accuracy") {
  auto c = small_config();
  c.schedule.rounds = 200;
  c.eval_every = 50;
  const auto r = run_training(c);
  REQUIRE(r.records.back().test_accuracy.has_value());
  CHECK(*r.records.back().test_accuracy >= 0.95);
}

TEST_CASE("null attack: Byzantines send the honest mean") {
  auto c = small_config();
  c.n_clients = 7;
  c.n_byzantine = 2;
  c.schedule.rounds = 20;
  std::vector<Vector> means;
  TrainingOptions opt;
  opt.attack_override = [&](const GradientSet& honest, std::span<const int> ids) {
    means.push_back(average(honest));
    return GradientSet(std::vector<Vector>(ids.size(), means.back()),
                       std::vector<int>(ids.begin(), ids.end()));
  };
  const auto r = run_training(c, opt);
  Vector theta = init_params(prepare_data(c).model, c.seed);
  REQUIRE(means.size() == 20);
  for (std::size_t t = 0; t < means.size(); ++t)
    for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= lr_schedule(t, c.schedule) * means[t][i];
  for (std::size_t i = 0; i < theta.size(); ++i) CHECK(r.theta[i] == doctest::Approx(theta[i]).epsilon(1e-9));
}

TEST_CASE("runs are deterministic and independent of worker count") {
  auto c = small_config();
  c.n_clients = 7;
  c.n_byzantine = 2;
  c.attack.kind = AttackKind::ALIE;
  c.defense.kind = AggregatorKind::Prodigy;
  c.schedule.beta = 0.9;
  TrainingOptions four;
  four.workers = 4;
  const auto a = run_training(c), b = run_training(c), w = run_training(c, four);
  CHECK(a.theta == b.theta);
  CHECK(a.theta == w.theta);
  c.seed = 5;
  CHECK(run_training(c).theta != a.theta);
}

TEST_CASE("evaluation cadence and records") {
  auto c = small_config();
  c.n_clients = 7;
  c.n_byzantine = 2;
  c.attack.kind = AttackKind::FOE;
  c.defense.kind = AggregatorKind::Prodigy;
  c.schedule.rounds = 12;
  const auto r = run_training(c);
  REQUIRE(r.records.size() == 12);
  for (const auto& rec : r.records) {
    const bool eval = (rec.round + 1) % 5 == 0 || rec.round == 11;
    CHECK(rec.test_accuracy.has_value() == eval);
    CHECK(rec.global_loss.has_value() == eval);
    REQUIRE(rec.scores.has_value());
    CHECK(rec.scores->final.size() == 7);
    CHECK(rec.attack_scale.has_value());
  }
}

TEST_CASE("Byzantine clients only when an attack is configured") {
  auto c = small_config();
  c.n_clients = 7;
  c.n_byzantine = 2;
  CHECK_FALSE(has_byzantine_clients(c));
  c.attack.kind = AttackKind::SignFlip;
  CHECK(has_byzantine_clients(c));
}
