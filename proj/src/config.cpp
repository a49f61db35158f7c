#include "prodigy/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "prodigy/errors.hpp"

namespace prodigy {

using nlohmann::json;

namespace {

// Walks one JSON object, remembering which keys were read so that leftovers
// can be reported as unknown.
class ObjectReader {
 public:
  ObjectReader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError(path_, "expected an object");
  }

  std::string path_of(const std::string& key) const { return path_ + "." + key; }

  const json* find(const std::string& key) {
    seen_.insert(key);
    auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }

  template <typename T>
  void read(const std::string& key, T& out) {
    if (const json* v = find(key)) out = convert<T>(*v, path_of(key));
  }

  template <typename T>
  void read(const std::string& key, std::optional<T>& out) {
    if (const json* v = find(key)) out = convert<T>(*v, path_of(key));
  }

  template <typename T>
  T require(const std::string& key) {
    const json* v = find(key);
    if (!v) throw ConfigError(path_of(key), "required key missing");
    return convert<T>(*v, path_of(key));
  }

  void finish() const {
    for (const auto& [key, _] : obj_.items())
      if (!seen_.contains(key)) throw ConfigError(path_of(key), "unknown key");
  }

  template <typename T>
  static T convert(const json& v, const std::string& path) {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(path, "expected a boolean");
      return v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError(path, "expected a string");
      return v.get<std::string>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw ConfigError(path, "expected an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (!is_count(v)) throw ConfigError(path, "expected a non-negative integer");
      }
      return v.get<T>();
    } else {
      if (!v.is_number()) throw ConfigError(path, "expected a number");
      return v.get<T>();
    }
  }

 private:
  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

std::string default_output_path() {
  const char* dir = std::getenv(kOutputDirEnv);
  std::string base = dir && *dir ? dir : "runs";
  return base + "/run";
}

ModelSpec parse_model(const json& j, const std::string& path) {
  ModelSpec m;
  ObjectReader r(j, path);
  if (const json* kind = r.find("kind")) {
    const auto name = ObjectReader::convert<std::string>(*kind, r.path_of("kind"));
    const auto parsed = model_kind_from_string(name);
    if (!parsed) throw ConfigError(r.path_of("kind"), "unknown model '" + name + "'");
    m.kind = *parsed;
  }
  r.read("hidden", m.hidden);
  r.read("l2_reg", m.l2_reg);
  r.finish();
  return m;
}

DataSpec parse_data(const json& j, const std::string& path) {
  DataSpec d;
  ObjectReader r(j, path);
  if (const json* src = r.find("source")) {
    const auto name = ObjectReader::convert<std::string>(*src, r.path_of("source"));
    if (name == "blobs")
      d.source = DataSource::Blobs;
    else if (name == "csv")
      d.source = DataSource::Csv;
    else
      throw ConfigError(r.path_of("source"), "expected \"blobs\" or \"csv\"");
  }
  r.read("n_classes", d.n_classes);
  r.read("dim", d.dim);
  r.read("per_class", d.per_class);
  r.read("test_per_class", d.test_per_class);
  r.read("separation", d.separation);
  r.read("train_csv", d.train_csv);
  r.read("test_csv", d.test_csv);
  if (const json* part = r.find("partition")) {
    const auto name = ObjectReader::convert<std::string>(*part, r.path_of("partition"));
    if (name == "iid")
      d.partition = PartitionKind::IID;
    else if (name == "dirichlet")
      d.partition = PartitionKind::Dirichlet;
    else
      throw ConfigError(r.path_of("partition"), "expected \"iid\" or \"dirichlet\"");
  }
  r.read("alpha", d.alpha);
  r.read("min_shard", d.min_shard);
  r.finish();
  return d;
}

TrainSchedule parse_schedule(const json& j, const std::string& path) {
  TrainSchedule s;
  ObjectReader r(j, path);
  r.read("rounds", s.rounds);
  r.read("local_iters", s.local_iters);
  r.read("batch_size", s.batch_size);
  r.read("beta", s.beta);
  r.read("gamma_hi", s.gamma_hi);
  r.read("gamma_lo", s.gamma_lo);
  r.read("switch_frac", s.switch_frac);
  r.finish();
  return s;
}

}  // namespace

AttackSpec parse_attack_spec(const json& j, const std::string& path) {
  AttackSpec a;
  std::string name;
  if (j.is_string()) {
    name = j.get<std::string>();
  } else {
    ObjectReader r(j, path);
    name = r.require<std::string>("kind");
    r.read("z", a.z);
    r.read("eps", a.eps);
    r.read("search", a.search);
    r.finish();
  }
  const auto kind = attack_kind_from_string(name);
  if (!kind) throw ConfigError(path + ".kind", "unknown attack '" + name + "'");
  a.kind = *kind;
  return a;
}

AggregatorSpec parse_defense_spec(const json& j, const std::string& path) {
  AggregatorSpec a;
  std::string name;
  if (j.is_string()) {
    name = j.get<std::string>();
  } else {
    ObjectReader r(j, path);
    name = r.require<std::string>("kind");
    r.read("nnm", a.nnm_enabled);
    r.read("trim_q", a.trim_q);
    r.read("weiszfeld_nu", a.weiszfeld_nu);
    r.read("weiszfeld_rounds", a.weiszfeld_rounds);
    r.read("clip_tau", a.clip_tau);
    r.read("clip_iters", a.clip_iters);
    r.read("epsilon_guard", a.epsilon_guard);
    r.finish();
  }
  const auto kind = aggregator_kind_from_string(name);
  if (!kind) throw ConfigError(path + ".kind", "unknown defense '" + name + "'");
  a.kind = *kind;
  return a;
}

void TrainSchedule::validate() const {
  if (local_iters < 1) throw ConfigError("$.schedule.local_iters", "must be >= 1");
  if (batch_size < 1) throw ConfigError("$.schedule.batch_size", "must be >= 1");
  if (!(beta >= 0.0 && beta <= 1.0)) throw ConfigError("$.schedule.beta", "must lie in [0, 1]");
  if (!(gamma_hi > 0.0)) throw ConfigError("$.schedule.gamma_hi", "must be > 0");
  if (!(gamma_lo > 0.0)) throw ConfigError("$.schedule.gamma_lo", "must be > 0");
  if (!(switch_frac >= 0.0 && switch_frac <= 1.0))
    throw ConfigError("$.schedule.switch_frac", "must lie in [0, 1]");
}

void ExperimentConfig::validate() const {
  const std::size_t n = n_clients;
  const std::size_t f = n_byzantine;
  if (n < 1) throw ConfigError("$.n_clients", "must be >= 1");
  if (2 * f >= n)
    throw ConfigError("$.n_byzantine", "need f < N/2 (got N=" + std::to_string(n) +
                                           ", f=" + std::to_string(f) + ")");
  if (eval_every < 1) throw ConfigError("$.eval_every", "must be >= 1");
  schedule.validate();

  try {
    model.validate();
  } catch (const InvalidInput& e) {
    // input_dim/n_classes are resolved from the data later; only check the rest.
    if (model.kind == ModelKind::MLP && model.hidden < 1)
      throw ConfigError("$.model.hidden", "must be >= 1");
    if (!(model.l2_reg >= 0.0)) throw ConfigError("$.model.l2_reg", "must be >= 0");
  }

  if (data.source == DataSource::Blobs) {
    if (data.n_classes < 2) throw ConfigError("$.data.n_classes", "must be >= 2");
    if (data.dim < static_cast<std::size_t>(data.n_classes))
      throw ConfigError("$.data.dim", "must be >= n_classes (one anchor axis per class)");
    if (data.per_class < 1) throw ConfigError("$.data.per_class", "must be >= 1");
    if (data.test_per_class < 1) throw ConfigError("$.data.test_per_class", "must be >= 1");
  } else {
    if (data.train_csv.empty()) throw ConfigError("$.data.train_csv", "required for csv data");
    if (data.test_csv.empty()) throw ConfigError("$.data.test_csv", "required for csv data");
  }
  if (data.partition == PartitionKind::Dirichlet && !(data.alpha > 0.0))
    throw ConfigError("$.data.alpha", "must be > 0");
  if (data.min_shard && *data.min_shard < schedule.batch_size)
    throw ConfigError("$.data.min_shard", "must be >= batch_size");

  if (attack.kind != AttackKind::None && f < 1)
    throw ConfigError("$.attack", "an attack needs n_byzantine >= 1");
  if (attack.kind == AttackKind::ALIE && !(attack.z > 0.0))
    throw ConfigError("$.attack.z", "must be > 0");
  if (attack.kind == AttackKind::FOE && !(attack.eps > 0.0))
    throw ConfigError("$.attack.eps", "must be > 0");

  const std::string d = "$.defense";
  switch (defense.kind) {
    case AggregatorKind::TrimmedMean: {
      const std::size_t q = defense.trim_q.value_or(f);
      if (2 * q >= n)
        throw ConfigError(d + ".trim_q", "need N - 2q >= 1 (got N=" + std::to_string(n) +
                                             ", q=" + std::to_string(q) + ")");
      break;
    }
    case AggregatorKind::GeoMed:
      if (!(defense.weiszfeld_nu > 0.0)) throw ConfigError(d + ".weiszfeld_nu", "must be > 0");
      if (defense.weiszfeld_rounds < 1) throw ConfigError(d + ".weiszfeld_rounds", "must be >= 1");
      break;
    case AggregatorKind::Krum:
      if (n < f + 3) throw ConfigError(d + ".kind", "krum needs N >= f + 3");
      break;
    case AggregatorKind::CClip:
      if (!(defense.clip_tau > 0.0)) throw ConfigError(d + ".clip_tau", "must be > 0");
      if (defense.clip_iters < 1) throw ConfigError(d + ".clip_iters", "must be >= 1");
      break;
    case AggregatorKind::Prodigy:
      if (f < 1) throw ConfigError("$.n_byzantine", "prodigy needs n_byzantine >= 1");
      if (!(defense.epsilon_guard > 0.0)) throw ConfigError(d + ".epsilon_guard", "must be > 0");
      break;
    case AggregatorKind::Average:
    case AggregatorKind::Median:
      break;
  }
}

bool is_count(const json& v) {
  return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
}

ExperimentConfig parse_config(const json& doc) {
  ExperimentConfig c;
  ObjectReader r(doc, "$");
  c.n_clients = r.require<std::size_t>("n_clients");
  c.n_byzantine = r.require<std::size_t>("n_byzantine");
  r.read("seed", c.seed);
  r.read("eval_every", c.eval_every);
  r.read("record_timing", c.record_timing);
  c.output_path = default_output_path();
  r.read("output_path", c.output_path);
  if (const json* v = r.find("model")) c.model = parse_model(*v, "$.model");
  if (const json* v = r.find("data")) c.data = parse_data(*v, "$.data");
  if (const json* v = r.find("schedule")) c.schedule = parse_schedule(*v, "$.schedule");
  if (const json* v = r.find("attack")) c.attack = parse_attack_spec(*v, "$.attack");
  if (const json* v = r.find("defense")) c.defense = parse_defense_spec(*v, "$.defense");
  r.finish();
  c.validate();
  return c;
}

ExperimentConfig parse_config_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("$", std::string("invalid JSON: ") + e.what());
  }
  return parse_config(doc);
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("$", "cannot read config file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

json config_to_json(const ExperimentConfig& c) {
  json model = {{"kind", to_string(c.model.kind)}, {"l2_reg", c.model.l2_reg}};
  if (c.model.kind == ModelKind::MLP) model["hidden"] = c.model.hidden;

  json data;
  if (c.data.source == DataSource::Blobs) {
    data = {{"source", "blobs"},
            {"n_classes", c.data.n_classes},
            {"dim", c.data.dim},
            {"per_class", c.data.per_class},
            {"test_per_class", c.data.test_per_class},
            {"separation", c.data.separation}};
  } else {
    data = {{"source", "csv"}, {"train_csv", c.data.train_csv}, {"test_csv", c.data.test_csv}};
  }
  data["partition"] = c.data.partition == PartitionKind::IID ? "iid" : "dirichlet";
  if (c.data.partition == PartitionKind::Dirichlet) data["alpha"] = c.data.alpha;
  data["min_shard"] = c.data.min_shard.value_or(2 * c.schedule.batch_size);

  json attack = {{"kind", to_string(c.attack.kind)}};
  if (c.attack.kind == AttackKind::ALIE) attack["z"] = c.attack.z;
  if (c.attack.kind == AttackKind::FOE) attack["eps"] = c.attack.eps;
  if (c.attack.kind == AttackKind::ALIE || c.attack.kind == AttackKind::FOE)
    attack["search"] = c.attack.search;

  const auto& d = c.defense;
  json defense = {{"kind", to_string(d.kind)}, {"nnm", d.nnm_enabled}};
  switch (d.kind) {
    case AggregatorKind::TrimmedMean:
      defense["trim_q"] = d.trim_q.value_or(c.n_byzantine);
      break;
    case AggregatorKind::GeoMed:
      defense["weiszfeld_nu"] = d.weiszfeld_nu;
      defense["weiszfeld_rounds"] = d.weiszfeld_rounds;
      break;
    case AggregatorKind::CClip:
      defense["clip_tau"] = d.clip_tau;
      defense["clip_iters"] = d.clip_iters;
      break;
    case AggregatorKind::Prodigy:
      defense["epsilon_guard"] = d.epsilon_guard;
      break;
    default:
      break;
  }

  return {{"n_clients", c.n_clients},
          {"n_byzantine", c.n_byzantine},
          {"seed", c.seed},
          {"eval_every", c.eval_every},
          {"record_timing", c.record_timing},
          {"output_path", c.output_path},
          {"model", model},
          {"data", data},
          {"schedule",
           {{"rounds", c.schedule.rounds},
            {"local_iters", c.schedule.local_iters},
            {"batch_size", c.schedule.batch_size},
            {"beta", c.schedule.beta},
            {"gamma_hi", c.schedule.gamma_hi},
            {"gamma_lo", c.schedule.gamma_lo},
            {"switch_frac", c.schedule.switch_frac}}},
          {"attack", attack},
          {"defense", defense}};
}

}  // namespace prodigy
