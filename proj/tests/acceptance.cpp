// Acceptance suite: one PASS/FAIL line per criterion.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "prodigy/aggregators.hpp"
#include "prodigy/bench.hpp"
#include "prodigy/engine.hpp"
#include "verification/properties.hpp"

namespace fs = std::filesystem;
using namespace prodigy;
using verification::PropertyResult;

namespace {

using Clock = std::chrono::steady_clock;

int failures = 0;

void report(int id, const std::string& title, bool ok, const std::string& detail) {
  if (!ok) ++failures;
  std::cout << (ok ? "PASS" : "FAIL") << " criterion " << id << ": " << title << " -- " << detail
            << std::endl;
}

void report(int id, const std::string& title, const std::vector<PropertyResult>& parts) {
  bool ok = true;
  std::string detail;
  for (const auto& p : parts) {
    ok = ok && p.passed;
    if (!detail.empty()) detail += "; ";
    detail += (p.passed ? "" : "FAILED ") + p.name + ": " + p.detail;
  }
  report(id, title, ok, detail);
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double v, const char* spec = "%.4f") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

unsigned hardware_jobs() { return std::max(2u, std::thread::hardware_concurrency()); }

void criterion_1() {
  const auto r = verification::check_prodigy_oracle(1000, 101);
  const bool fast = r.seconds < 30.0;
  report(1, "ProDiGy matches the literal transcription", r.passed && fast,
         r.detail + ", " + fmt(r.seconds, "%.2f") + "s (limit 30s)");
}

void criterion_2() {
  const auto r = verification::check_exact_f_filtering(10000, 102);
  report(2, "exactly f clients filtered", r.passed, r.detail);
}

void criterion_3() {
  report(3, "convex combination, homogeneity, permutation equivariance",
         {verification::check_convex_combination(1000, 103),
          verification::check_homogeneity(1000, 104),
          verification::check_permutation_equivariance(1000, 105)});
}

void criterion_4() {
  auto parts = verification::check_baseline_oracles(1000, 106);

  // Worked examples.
  const double geo = geometric_median(GradientSet(std::vector<Vector>{{0.0}, {0.0}, {3.0}}), 0.1, 3)[0];
  const bool geo_ok = std::abs(geo - 3.0 / 17.0) < 1e-12;
  parts.push_back({"geomed {0,0,3}", geo_ok, fmt(geo, "%.5f") + " (expected 0.17647)", 0.0});
  AggregatorState zero;
  const double clip = centered_clip(GradientSet(std::vector<Vector>{{30.0}}), zero, 10.0, 3)[0];
  parts.push_back({"cclip {30}", clip == 30.0, fmt(clip, "%.6g") + " (expected 30)", 0.0});
  report(4, "baseline rules match their oracles", parts);
}

void criterion_5() {
  report(5, "analytic gradients match finite differences",
         {verification::check_gradient(ModelKind::SoftmaxLinear, 100, 107),
          verification::check_gradient(ModelKind::MLP, 100, 108)});
}

void criterion_6() {
  const auto r = verification::check_attack_search(200, 109);
  report(6, "attack search picks the grid maximum", r.passed, r.detail);
}

void criterion_7(const fs::path& work) {
  const auto start = Clock::now();
  SweepSpec spec = load_sweep(PRODIGY_SOURCE_DIR "/configs/blobs_sweep.json");
  spec.output_path = (work / "blobs_sweep").string();
  const SweepResult result = run_sweep(spec, hardware_jobs());
  const double wall = seconds_since(start);

  std::map<std::pair<std::string, std::string>, double> acc;
  for (const auto& c : result.cells) acc[{c.defense, c.attack}] = c.mean;
  const std::vector<std::string> attacks = {"alie", "foe(0.1)", "foe(100)", "label_flip",
                                            "sign_flip"};
  std::map<std::string, double> worst;
  for (const auto& c : result.cells) {
    if (c.attack == "none") continue;
    const double v = c.failures.empty() ? c.mean : -1.0;
    auto [it, fresh] = worst.emplace(c.defense, v);
    if (!fresh) it->second = std::min(it->second, v);
  }

  const double nodef = acc[{"average", "foe(100)"}];
  const bool a_ok = std::abs(nodef - 0.10) <= 0.05;

  const double clean = acc[{"prodigy", "none"}];
  bool b_ok = true;
  std::string b_detail = "no attack " + fmt(clean);
  for (const auto& a : attacks) {
    const double v = acc[{"prodigy", a}];
    b_ok = b_ok && std::abs(clean - v) <= 0.15;
    b_detail += ", " + a + " " + fmt(v);
  }

  bool c_ok = true;
  std::string c_detail = "prodigy " + fmt(worst["prodigy"]);
  for (const auto& [d, w] : worst) {
    if (d == "prodigy") continue;
    c_ok = c_ok && worst["prodigy"] >= w;
    c_detail += ", " + d + " " + fmt(w);
  }

  const bool time_ok = wall <= 15 * 60;
  const bool clean_runs = result.failed_runs == 0;
  report(7, "qualitative reproduction on blobs",
         a_ok && b_ok && c_ok && time_ok && clean_runs,
         std::string(a_ok ? "" : "FAILED ") + "(a) no defense under foe(100) " + fmt(nodef) +
             " vs chance 0.10; " + (b_ok ? "" : "FAILED ") + "(b) " + b_detail + "; " +
             (c_ok ? "" : "FAILED ") + "(c) worst case " + c_detail + "; " +
             std::to_string(result.runs) + " runs, " + std::to_string(result.failed_runs) +
             " failed, " + fmt(wall, "%.1f") + "s (limit 900s)");
}

void criterion_8() {
  const auto r = verification::check_complexity_scaling(20);
  report(8, "aggregation time scales as N^2", r.passed, r.detail);
}

void criterion_9(const fs::path& work) {
  nlohmann::json doc = nlohmann::json::parse(slurp(PRODIGY_SOURCE_DIR "/configs/blobs_sweep.json"));
  doc["base"]["schedule"]["rounds"] = 60;
  doc["axes"]["defenses"] = {"average", "median", {{"kind", "krum"}, {"nnm", true}}, "prodigy"};
  doc["axes"]["attacks"] = {"alie", {{"kind", "foe"}, {"eps", 100}}, "label_flip", "sign_flip"};
  doc["axes"]["seeds"] = {1, 2};

  std::vector<fs::path> dirs;
  for (unsigned jobs : {1u, 2u, 4u}) {
    doc["output_path"] = (work / ("determinism_j" + std::to_string(jobs))).string();
    dirs.emplace_back(doc["output_path"].get<std::string>());
    run_sweep(parse_sweep(doc), jobs);
  }

  std::size_t compared = 0;
  std::string mismatch;
  for (const auto& entry : fs::directory_iterator(dirs[0] / "runs")) {
    const auto rel = entry.path().filename() / "metrics.csv";
    const std::string ref = slurp(dirs[0] / "runs" / rel);
    for (std::size_t i = 1; i < dirs.size(); ++i)
      if (slurp(dirs[i] / "runs" / rel) != ref && mismatch.empty()) mismatch = rel.string();
    ++compared;
  }

  // Client-level parallelism inside a single run.
  ExperimentConfig c = parse_config(doc["base"]);
  c.attack.kind = AttackKind::ALIE;
  c.defense.kind = AggregatorKind::Prodigy;
  std::string serial;
  bool workers_ok = true;
  for (unsigned workers : {1u, 4u}) {
    TrainingOptions opt;
    opt.workers = workers;
    std::ostringstream os;
    write_metrics_csv(os, run_training(c, opt).records);
    if (serial.empty())
      serial = os.str();
    else
      workers_ok = workers_ok && os.str() == serial;
  }

  const bool ok = mismatch.empty() && compared > 0 && workers_ok;
  report(9, "metrics independent of parallelism", ok,
         std::to_string(compared) + " runs x jobs {1,2,4} " + (mismatch.empty() ? "identical" : "differ at " + mismatch) +
             "; single run with 1 vs 4 workers " + (workers_ok ? "identical" : "differs"));
}

}  // namespace

int main() {
  const fs::path work = fs::path(ACCEPTANCE_WORK_DIR);
  fs::remove_all(work);
  fs::create_directories(work);
  const auto start = Clock::now();

  const std::vector<std::function<void()>> criteria = {
      criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6,
      [&] { criterion_7(work); }, criterion_8, [&] { criterion_9(work); }};
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    try {
      criteria[i]();
    } catch (const std::exception& e) {
      ++failures;
      std::cout << "FAIL criterion " << i + 1 << ": exception: " << e.what() << std::endl;
    }
  }

  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed")
            << " (" << fmt(seconds_since(start), "%.1f") << "s)" << std::endl;
  return failures == 0 ? 0 : 1;
}
