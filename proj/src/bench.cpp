#include "prodigy/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

#include "prodigy/errors.hpp"

namespace prodigy {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  return out;
}

}  // namespace

void to_json(json& j, const TrustScores& s) {
  j = json{{"proximity", s.proximity},
           {"dissimilarity", s.dissimilarity},
           {"composite", s.composite},
           {"final", s.final},
           {"threshold", s.threshold}};
}

void write_metrics_csv(std::ostream& os, const std::vector<RoundRecord>& records) {
  os << kMetricsHeader << '\n';
  for (const auto& r : records) {
    os << r.round << ',' << fmt(r.gamma) << ',';
    if (r.global_loss) os << fmt(*r.global_loss);
    os << ',';
    if (r.test_accuracy) os << fmt(*r.test_accuracy);
    os << ',' << fmt(r.agg_wall_ms) << ',' << (r.degenerate ? 1 : 0) << '\n';
  }
}

void write_trust_jsonl(std::ostream& os, const std::vector<RoundRecord>& records) {
  for (const auto& r : records) {
    if (!r.scores) continue;
    json line = *r.scores;
    line["round"] = r.round;
    line["degenerate"] = r.degenerate;
    os << line.dump() << '\n';
  }
}

RunSummary run_experiment(const ExperimentConfig& config, const TrainingOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  const TrainingResult result = run_training(config, options);
  RunSummary summary;
  summary.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  bool any_eval = false;
  for (const auto& r : result.records) {
    if (r.degenerate) ++summary.degenerate_rounds;
    if (!r.test_accuracy) continue;
    summary.worst_accuracy = any_eval ? std::min(summary.worst_accuracy, *r.test_accuracy)
                                      : *r.test_accuracy;
    summary.final_accuracy = *r.test_accuracy;
    any_eval = true;
  }

  const fs::path dir(config.output_path);
  fs::create_directories(dir);
  {
    auto out = open_out(dir / "metrics.csv");
    write_metrics_csv(out, result.records);
  }
  if (config.defense.kind == AggregatorKind::Prodigy) {
    auto out = open_out(dir / "trust_scores.jsonl");
    write_trust_jsonl(out, result.records);
  }
  {
    json s = {{"final_accuracy", summary.final_accuracy},
              {"worst_accuracy", summary.worst_accuracy},
              {"degenerate_rounds", summary.degenerate_rounds},
              {"rounds", result.records.size()},
              {"wall_seconds", summary.wall_seconds},
              {"config", config_to_json(config)}};
    auto out = open_out(dir / "summary.json");
    out << s.dump(2) << '\n';
  }
  return summary;
}

std::size_t SweepSpec::grid_size() const {
  return attacks.size() * defenses.size() * seeds.size() * n_byzantine.size() * n_clients.size();
}

SweepSpec parse_sweep(const json& doc) {
  if (!doc.is_object()) throw ConfigError("$", "expected an object");
  SweepSpec s;
  for (const auto& [key, _] : doc.items())
    if (key != "base" && key != "axes" && key != "max_runs" && key != "output_path")
      throw ConfigError("$." + key, "unknown key");
  if (!doc.contains("base")) throw ConfigError("$.base", "required key missing");
  s.base = doc.at("base");
  if (!s.base.is_object()) throw ConfigError("$.base", "expected an object");
  if (doc.contains("max_runs")) {
    if (!is_count(doc["max_runs"]))
      throw ConfigError("$.max_runs", "expected a non-negative integer");
    s.max_runs = doc["max_runs"].get<std::size_t>();
  }
  if (doc.contains("output_path")) {
    if (!doc["output_path"].is_string()) throw ConfigError("$.output_path", "expected a string");
    s.output_path = doc["output_path"].get<std::string>();
  } else {
    const char* dir = std::getenv(kOutputDirEnv);
    s.output_path = std::string(dir && *dir ? dir : "runs") + "/sweep";
  }

  const json axes = doc.value("axes", json::object());
  if (!axes.is_object()) throw ConfigError("$.axes", "expected an object");
  for (const auto& [key, value] : axes.items()) {
    const std::string path = "$.axes." + key;
    if (!value.is_array() || value.empty()) throw ConfigError(path, "expected a non-empty array");
    if (key == "attacks") {
      for (const auto& a : value) s.attacks.push_back(a);
    } else if (key == "defenses") {
      for (const auto& d : value) s.defenses.push_back(d);
    } else if (key == "seeds" || key == "n_byzantine" || key == "n_clients") {
      for (const auto& v : value)
        if (!is_count(v)) throw ConfigError(path, "expected non-negative integers");
      if (key == "seeds")
        s.seeds = value.get<std::vector<std::uint64_t>>();
      else if (key == "n_byzantine")
        s.n_byzantine = value.get<std::vector<std::size_t>>();
      else
        s.n_clients = value.get<std::vector<std::size_t>>();
    } else {
      throw ConfigError(path, "unknown axis");
    }
  }

  // Unset axes take the base value.
  const auto base_or = [&](const char* key, json fallback) {
    return s.base.contains(key) ? s.base[key] : fallback;
  };
  if (s.attacks.empty()) s.attacks.push_back(base_or("attack", "none"));
  if (s.defenses.empty()) s.defenses.push_back(base_or("defense", "average"));
  if (s.seeds.empty()) s.seeds.push_back(base_or("seed", 1).get<std::uint64_t>());
  if (s.n_byzantine.empty()) {
    if (!s.base.contains("n_byzantine")) throw ConfigError("$.base.n_byzantine", "required");
    s.n_byzantine.push_back(s.base["n_byzantine"].get<std::size_t>());
  }
  if (s.n_clients.empty()) {
    if (!s.base.contains("n_clients")) throw ConfigError("$.base.n_clients", "required");
    s.n_clients.push_back(s.base["n_clients"].get<std::size_t>());
  }
  for (std::size_t i = 0; i < s.attacks.size(); ++i)
    parse_attack_spec(s.attacks[i], "$.axes.attacks[" + std::to_string(i) + "]");
  for (std::size_t i = 0; i < s.defenses.size(); ++i)
    parse_defense_spec(s.defenses[i], "$.axes.defenses[" + std::to_string(i) + "]");
  if (s.grid_size() > s.max_runs)
    throw ConfigError("$.axes", "grid has " + std::to_string(s.grid_size()) +
                                    " runs, above max_runs=" + std::to_string(s.max_runs));
  return s;
}

SweepSpec load_sweep(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("$", "cannot read sweep file " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("$", std::string("invalid JSON: ") + e.what());
  }
  return parse_sweep(doc);
}

double final_accuracy_from_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::string line;
  std::optional<double> last;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() >= 4 && !cells[3].empty()) last = std::stod(cells[3]);
  }
  if (!last) throw std::runtime_error(path + " has no evaluated round");
  return *last;
}

namespace {

struct GridPoint {
  std::size_t cell = 0;
  json config;
  std::string attack_label;
  std::string defense_label;
  std::size_t n = 0, f = 0;
  std::uint64_t seed = 0;
  fs::path dir;
};

}  // namespace

SweepResult run_sweep(const SweepSpec& spec, unsigned jobs) {
  SweepResult result;
  std::vector<GridPoint> points;
  std::map<std::tuple<std::size_t, std::size_t, std::string, std::string>, std::size_t> cell_index;

  for (std::size_t n : spec.n_clients)
    for (std::size_t f : spec.n_byzantine)
      for (const auto& dj : spec.defenses)
        for (const auto& aj : spec.attacks) {
          const std::string d_label = parse_defense_spec(dj).label();
          const std::string a_label = parse_attack_spec(aj).label();
          const auto key = std::make_tuple(n, f, d_label, a_label);
          if (!cell_index.contains(key)) {
            cell_index[key] = result.cells.size();
            SweepCell c;
            c.defense = d_label;
            c.attack = a_label;
            c.n_clients = n;
            c.n_byzantine = f;
            result.cells.push_back(std::move(c));
          }
          for (std::uint64_t seed : spec.seeds) {
            GridPoint p;
            p.cell = cell_index[key];
            p.attack_label = a_label;
            p.defense_label = d_label;
            p.n = n;
            p.f = f;
            p.seed = seed;
            std::ostringstream name;
            name << d_label << "__" << a_label << "__N" << n << "_f" << f << "_s" << seed;
            p.dir = fs::path(spec.output_path) / "runs" / name.str();
            p.config = spec.base;
            p.config["n_clients"] = n;
            p.config["n_byzantine"] = f;
            p.config["attack"] = aj;
            p.config["defense"] = dj;
            p.config["seed"] = seed;
            p.config["output_path"] = p.dir.string();
            points.push_back(std::move(p));
          }
        }

  std::vector<std::string> errors(points.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < points.size(); i = next++) {
      try {
        run_experiment(parse_config(points[i].config));
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  const unsigned count = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(points.size())));
  std::vector<std::thread> threads;
  for (unsigned w = 1; w < count; ++w) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();

  // Summaries come only from the CSVs on disk.
  result.runs = points.size();
  for (std::size_t i = 0; i < points.size(); ++i) {
    SweepCell& cell = result.cells[points[i].cell];
    if (errors[i].empty()) {
      try {
        cell.accuracies.push_back(final_accuracy_from_csv((points[i].dir / "metrics.csv").string()));
        continue;
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
    cell.failures.push_back("seed " + std::to_string(points[i].seed) + ": " + errors[i]);
    ++result.failed_runs;
  }

  // Worst case over the attack cells; "none" counts only for a defense that has
  // no other cell.
  std::set<std::tuple<std::string, std::size_t, std::size_t>> attacked;
  for (const auto& c : result.cells)
    if (c.attack != "none") attacked.emplace(c.defense, c.n_clients, c.n_byzantine);
  std::map<std::tuple<std::string, std::size_t, std::size_t>, double> worst;
  for (auto& c : result.cells) {
    if (c.accuracies.empty()) {
      c.mean = c.std = std::nan("");
    } else {
      double sum = 0.0;
      for (double a : c.accuracies) sum += a;
      c.mean = sum / static_cast<double>(c.accuracies.size());
      double var = 0.0;
      for (double a : c.accuracies) var += (a - c.mean) * (a - c.mean);
      c.std = std::sqrt(var / static_cast<double>(c.accuracies.size()));
    }
    const auto key = std::make_tuple(c.defense, c.n_clients, c.n_byzantine);
    if (c.attack == "none" && attacked.contains(key)) continue;
    // A cell with no successful run counts as the worst case (NaN propagates).
    const double value = c.accuracies.empty() ? std::nan("") : c.mean;
    auto [it, fresh] = worst.try_emplace(key, value);
    if (!fresh && !std::isnan(it->second))
      it->second = std::isnan(value) ? value : std::min(it->second, value);
  }
  for (auto& c : result.cells) c.worst_case = worst[std::make_tuple(c.defense, c.n_clients, c.n_byzantine)];

  fs::create_directories(spec.output_path);
  auto out = open_out(fs::path(spec.output_path) / "summary.csv");
  write_sweep_csv(out, result);
  return result;
}

void write_sweep_csv(std::ostream& os, const SweepResult& result) {
  os << kSweepHeader << '\n';
  for (const auto& c : result.cells) {
    os << c.defense << ',' << c.attack << ',' << c.n_clients << ',' << c.n_byzantine << ','
       << c.accuracies.size() << ',' << c.failures.size() << ',' << fmt(c.mean) << ','
       << fmt(c.std) << ',' << fmt(c.worst_case) << '\n';
  }
}

void partition_preview(std::ostream& os, const ExperimentConfig& config) {
  const PreparedData data = prepare_data(config);
  const std::size_t f = has_byzantine_clients(config) ? config.n_byzantine : 0;
  os << "client,role,size";
  for (int c = 0; c < data.model.n_classes; ++c) os << ",c" << c;
  os << '\n';
  for (std::size_t k = 0; k < data.shards.size(); ++k) {
    os << k << ',' << (k < f ? "byzantine" : "honest") << ',' << data.shards[k].size();
    for (std::size_t count : label_histogram(data.shards[k])) os << ',' << count;
    os << '\n';
  }
}

}  // namespace prodigy
