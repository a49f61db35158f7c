#include "prodigy/engine.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <numeric>
#include <thread>

#include "prodigy/attacks.hpp"
#include "prodigy/errors.hpp"
#include "prodigy/rng.hpp"

namespace prodigy {

namespace {

LabeledDataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open dataset " + path);
  return read_dataset_csv(in);
}

// Runs fn(i) for i in [0, n) on up to `workers` threads. Each index writes only
// its own output slot.
template <typename Fn>
void parallel_for(std::size_t n, unsigned workers, Fn&& fn) {
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const unsigned count = std::min<unsigned>(workers, static_cast<unsigned>(n));
  std::vector<std::exception_ptr> errors(count);
  std::vector<std::thread> threads;
  threads.reserve(count);
  for (unsigned w = 0; w < count; ++w) {
    threads.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += count) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

LabeledDataset concat(std::span<const LabeledDataset> parts) {
  LabeledDataset out;
  out.n_classes = parts.empty() ? 0 : parts.front().n_classes;
  for (const auto& p : parts) {
    out.features.insert(out.features.end(), p.features.begin(), p.features.end());
    out.labels.insert(out.labels.end(), p.labels.begin(), p.labels.end());
  }
  return out;
}

}  // namespace

double lr_schedule(std::size_t t, const TrainSchedule& sched) {
  return static_cast<double>(t) <= sched.switch_frac * static_cast<double>(sched.rounds)
             ? sched.gamma_hi
             : sched.gamma_lo;
}

std::vector<std::vector<std::size_t>> sample_batches(std::size_t shard_size, std::size_t local_iters,
                                                     std::size_t batch_size, std::mt19937_64& rng) {
  if (batch_size < 1 || shard_size < batch_size)
    throw InvalidInput("sample_batches: shard of " + std::to_string(shard_size) +
                       " samples cannot fill a batch of " + std::to_string(batch_size));
  std::vector<std::size_t> perm(shard_size);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::size_t pos = 0;
  std::vector<std::vector<std::size_t>> batches;
  batches.reserve(local_iters);
  for (std::size_t e = 0; e < local_iters; ++e) {
    if (shard_size - pos < batch_size) {
      std::shuffle(perm.begin(), perm.end(), rng);
      pos = 0;
    }
    batches.emplace_back(perm.begin() + pos, perm.begin() + pos + batch_size);
    pos += batch_size;
  }
  return batches;
}

Vector client_update(const ModelSpec& spec, const Vector& theta_t, const ClientState& client,
                     const TrainSchedule& sched, std::size_t t, bool use_flipped) {
  const LabeledDataset& data = use_flipped ? client.flipped_shard.value() : client.shard;
  const double gamma = lr_schedule(t, sched);
  auto rng = make_rng({client.seed, static_cast<std::uint64_t>(client.id), t, kBatchSalt});
  const auto batches = sample_batches(data.size(), sched.local_iters, sched.batch_size, rng);

  // (theta_t - theta_E) / gamma telescopes to the sum of the step gradients;
  // summing directly keeps E = 1 exactly equal to the batch gradient.
  Vector theta = theta_t;
  Vector update(theta.size(), 0.0);
  for (const auto& idx : batches) {
    const Vector grad = model_gradient(spec, theta, data.subset(idx));
    for (std::size_t i = 0; i < theta.size(); ++i) {
      theta[i] -= gamma * grad[i];
      update[i] += grad[i];
    }
  }
  return update;
}

Vector apply_momentum(ClientState& client, const Vector& g, double beta) {
  if (!(beta >= 0.0 && beta <= 1.0)) throw InvalidInput("apply_momentum: beta outside [0, 1]");
  if (client.momentum.size() != g.size()) client.momentum.assign(g.size(), 0.0);
  for (std::size_t i = 0; i < g.size(); ++i)
    client.momentum[i] = beta * client.momentum[i] + (1.0 - beta) * g[i];
  return client.momentum;
}

bool has_byzantine_clients(const ExperimentConfig& config) {
  return config.attack.kind != AttackKind::None && config.n_byzantine > 0;
}

PreparedData prepare_data(const ExperimentConfig& config) {
  const DataSpec& ds = config.data;
  LabeledDataset train;
  PreparedData out;
  if (ds.source == DataSource::Blobs) {
    train = generate_blobs(ds.n_classes, ds.dim, ds.per_class, ds.separation, config.seed);
    out.test = generate_blobs(ds.n_classes, ds.dim, ds.test_per_class, ds.separation,
                              config.seed ^ 0x7465737400000000ULL);
  } else {
    train = load_csv(ds.train_csv);
    out.test = load_csv(ds.test_csv);
    const int classes = std::max(train.n_classes, out.test.n_classes);
    train.n_classes = out.test.n_classes = classes;
    if (train.dim() != out.test.dim())
      throw InvalidInput("train and test csv have different feature counts");
  }

  PartitionSpec ps;
  ps.kind = ds.partition;
  ps.alpha = ds.alpha;
  ps.n_clients = config.n_clients;
  ps.min_shard = ds.min_shard.value_or(2 * config.schedule.batch_size);
  out.shards = partition(train, ps, config.seed);

  out.model = config.model;
  out.model.input_dim = train.dim();
  out.model.n_classes = train.n_classes;
  out.model.validate();
  return out;
}

TrainingResult run_training(const ExperimentConfig& config, const TrainingOptions& options) {
  config.validate();
  PreparedData data = prepare_data(config);
  const ModelSpec& spec = data.model;
  const TrainSchedule& sched = config.schedule;
  const std::size_t n = config.n_clients;

  const bool byzantine = options.attack_override ? config.n_byzantine > 0
                                                 : has_byzantine_clients(config);
  const std::size_t f = byzantine ? config.n_byzantine : 0;
  const bool label_flip = !options.attack_override && config.attack.kind == AttackKind::LabelFlip;
  const bool sign_flip = !options.attack_override && config.attack.kind == AttackKind::SignFlip;
  const bool trains_locally = label_flip || sign_flip;

  std::vector<ClientState> clients(n);
  for (std::size_t k = 0; k < n; ++k) {
    ClientState& c = clients[k];
    c.id = static_cast<int>(k);
    c.role = k < f ? ClientRole::Byzantine : ClientRole::Honest;
    c.shard = std::move(data.shards[k]);
    if (c.role == ClientRole::Byzantine && label_flip) c.flipped_shard = flip_labels(c.shard);
    c.momentum.assign(spec.param_count(), 0.0);
    c.seed = config.seed;
  }

  std::vector<int> byz_ids(f);
  std::iota(byz_ids.begin(), byz_ids.end(), 0);
  std::vector<int> honest_ids(n - f);
  std::iota(honest_ids.begin(), honest_ids.end(), static_cast<int>(f));

  std::vector<LabeledDataset> honest_shards;
  for (std::size_t k = f; k < n; ++k) honest_shards.push_back(clients[k].shard);
  const LabeledDataset honest_train = concat(honest_shards);

  const Aggregator aggregator(config.defense, config.n_byzantine);
  aggregator.check_compatible(n);
  AggregatorState agg_state;

  TrainingResult result;
  result.theta = init_params(spec, config.seed);
  result.records.reserve(sched.rounds);

  std::vector<Vector> raw(n);
  for (std::size_t t = 0; t < sched.rounds; ++t) {
    RoundRecord rec;
    rec.round = t;
    rec.gamma = lr_schedule(t, sched);

    // Local training: every honest client, plus Byzantines whose attack starts
    // from their own (possibly label-flipped) data.
    parallel_for(n, options.workers, [&](std::size_t k) {
      const bool is_byz = k < f;
      if (is_byz && !trains_locally) return;
      raw[k] = client_update(spec, result.theta, clients[k], sched, t, is_byz && label_flip);
    });

    std::vector<Vector> honest_sent;
    honest_sent.reserve(n - f);
    for (std::size_t k = f; k < n; ++k)
      honest_sent.push_back(apply_momentum(clients[k], raw[k], sched.beta));
    const GradientSet honest(std::move(honest_sent), honest_ids);

    GradientSet round_set = honest;
    if (f > 0) {
      GradientSet byz_updates;
      if (options.attack_override) {
        byz_updates = options.attack_override(honest, byz_ids);
      } else {
        const DefenseFn defense = [&](const GradientSet& g) { return aggregator(g, agg_state); };
        std::optional<GradientSet> local;
        if (trains_locally)
          local = GradientSet(std::vector<Vector>(raw.begin(), raw.begin() + f), byz_ids);
        auto crafted = craft_attack(config.attack, honest, byz_ids, defense, local);
        rec.attack_scale = crafted.scale;
        byz_updates = std::move(crafted.updates);
        if (trains_locally) {
          // Flip attacks keep their own momentum over what they send.
          std::vector<Vector> sent;
          for (std::size_t k = 0; k < f; ++k)
            sent.push_back(apply_momentum(clients[k], byz_updates[k], sched.beta));
          byz_updates = GradientSet(std::move(sent), byz_ids);
        }
      }
      round_set = merge_by_client_id(honest, byz_updates);
    }

    const auto start = std::chrono::steady_clock::now();
    AggregateResult agg = aggregator(round_set, agg_state);
    const auto stop = std::chrono::steady_clock::now();
    if (config.record_timing)
      rec.agg_wall_ms = std::chrono::duration<double, std::milli>(stop - start).count();

    rec.degenerate = agg.degenerate;
    rec.scores = std::move(agg.scores);
    if (!agg.degenerate) {
      for (std::size_t i = 0; i < result.theta.size(); ++i)
        result.theta[i] -= rec.gamma * agg.value[i];
      agg_state.prev_aggregate = std::move(agg.value);
    }

    if ((t + 1) % config.eval_every == 0 || t + 1 == sched.rounds) {
      rec.global_loss = evaluate(spec, result.theta, honest_train).loss;
      rec.test_accuracy = evaluate(spec, result.theta, data.test).accuracy;
    }
    result.records.push_back(std::move(rec));
  }
  return result;
}

}  // namespace prodigy
