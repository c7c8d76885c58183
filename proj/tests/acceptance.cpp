#include <chrono>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "gsvin/binio.hpp"
#include "gsvin/checks.hpp"
#include "gsvin/evaluation.hpp"
#include "gsvin/training.hpp"

using namespace gsvin;
namespace fs = std::filesystem;

namespace {

class Timer {
 public:
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count(); }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

int failures = 0;

void report(int id, const std::string& name, bool passed, const std::string& detail, double seconds, double limit) {
  const bool in_time = limit <= 0.0 || seconds < limit;
  const bool ok = passed && in_time;
  if (!ok) ++failures;
  std::printf("%s C%d %s: %s [%.1fs%s]\n", ok ? "PASS" : "FAIL", id, name.c_str(), detail.c_str(), seconds,
              in_time ? "" : " over limit");
  std::fflush(stdout);
}

void report(int id, const std::vector<CheckResult>& parts, double limit) {
  bool passed = true;
  double seconds = 0.0;
  std::string detail;
  for (const CheckResult& r : parts) {
    passed = passed && r.passed;
    seconds += r.seconds;
    if (!detail.empty()) detail += "; ";
    detail += r.name + " " + r.detail;
  }
  report(id, parts.front().name, passed, detail, seconds, limit);
}

Dataset dataset(int size, int maps, std::uint64_t seed) {
  DatasetManifest m;
  m.height = size;
  m.width = size;
  m.maps = maps;
  m.seed = seed;
  return generate_dataset(m);
}

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

void criterion_training_trend() {
  const Timer timer;
  constexpr std::uint64_t seeds[] = {0, 1, 2};
  double gs_sum = 0.0, vin_sum = 0.0;
  bool diverged = false;
  std::string detail;
  for (std::uint64_t seed : seeds) {
    const Dataset data = dataset(8, 5000, seed);
    TrainConfig tc;
    tc.seed = seed;
    for (Variant v : {Variant::GSVIN, Variant::VIN}) {
      const ModelConfig mc = ModelConfig::for_map(v, 8, 8, 7, 1.0);
      const TrainState s = train(mc, data, tc);
      if (s.record.diverged()) diverged = true;
      const double acc = s.record.diverged() ? 0.0 : single_step_accuracy(mc, s.params, data.test);
      (v == Variant::GSVIN ? gs_sum : vin_sum) += acc;
      detail += fmt("%s/seed%llu=%s ", std::string(variant_name(v)).c_str(), static_cast<unsigned long long>(seed),
                    s.record.diverged() ? "diverged" : fmt("%.4f", acc).c_str());
      std::printf("  C6 progress: %s (%.0fs elapsed)\n", detail.c_str(), timer.seconds());
      std::fflush(stdout);
    }
  }
  const double gs = gs_sum / 3.0, vin = vin_sum / 3.0;
  const bool a = gs >= 0.80, b = gs >= vin, c = !diverged;
  report(6, "training_trend",
         a && b && c,
         fmt("(a) GS-VIN mean %.4f >= 0.80 %s; (b) VIN mean %.4f, GS-VIN >= VIN %s; (c) no divergence %s; ", gs,
             a ? "yes" : "no", vin, b ? "yes" : "no", c ? "yes" : "no") +
             detail,
         timer.seconds(), 3600.0);
}

void criterion_divergence_marker() {
  const Timer timer;
  SweepSpec spec;
  spec.variant = Variant::GSVIN;
  spec.data.height = 8;
  spec.data.width = 8;
  spec.data.maps = 20;
  spec.f_values = {3};
  spec.k_primes = {1.0};
  spec.train.epochs = 3;
  spec.train.batch_size = 32;
  spec.train.learning_rate = 1e3;
  const SweepResult r = run_sweep(spec, generate_dataset(spec.data));
  const std::string csv = sweep_csv(r);
  const std::string row = csv.substr(csv.find('\n') + 1);
  const bool ok = r.rows.size() == 1 && r.rows[0].status == "diverged" && !r.rows[0].report &&
                  row.find(",diverged,*,*,*,") != std::string::npos;
  report(7, "divergence_marker", ok, fmt("status %s, csv row: %s", r.rows.empty() ? "?" : r.rows[0].status.c_str(),
                                          row.substr(0, row.size() - 1).c_str()),
         timer.seconds(), 0.0);
}

void criterion_pipeline_determinism() {
  const Timer timer;
  const fs::path root = fs::temp_directory_path() / "gsvin_acceptance_c8";
  fs::remove_all(root);
  DatasetManifest m;
  m.height = 8;
  m.width = 8;
  m.maps = 60;
  m.seed = 8;
  const ModelConfig mc = ModelConfig::for_map(Variant::GSVIN, 8, 8, 7);
  TrainConfig tc;
  tc.epochs = 3;
  tc.batch_size = 64;
  tc.seed = 8;

  struct Outcome {
    std::string train_bytes, test_bytes;
    std::vector<double> losses;
    ParamSet params;
    EvalReport report;
  };
  auto pipeline = [&](const fs::path& dir) {
    build_dataset(m, dir / "data", 1);
    const Dataset data = load_dataset_dir(dir / "data");
    const TrainState s = train(mc, data, tc);
    return Outcome{read_file(dir / "data" / "train.gwds"), read_file(dir / "data" / "test.gwds"),
                   s.record.loss_trajectory(), s.params, evaluate(mc, s.params, data.test)};
  };
  const Outcome a = pipeline(root / "a");
  const Outcome b = pipeline(root / "b");
  fs::remove_all(root);
  const bool files = a.train_bytes == b.train_bytes && a.test_bytes == b.test_bytes;
  const bool losses = a.losses == b.losses && a.params == b.params;
  const bool eval = a.report == b.report;
  report(8, "pipeline_determinism", files && losses && eval,
         fmt("dataset files %s, epoch losses %s, eval report %s", files ? "identical" : "DIFFER",
             losses ? "identical" : "DIFFER", eval ? "identical" : "DIFFER"),
         timer.seconds(), 0.0);
}

}  // namespace

int main() {
  report(1, {check_heuristic_table4()}, 1.0);
  report(2, {check_vi_equivalence(60, 16, 2024)}, 60.0);
  report(3, {check_gradients(Variant::VIN, 200, 1), check_gradients(Variant::VIRN, 200, 1),
             check_gradients(Variant::GSVIN, 200, 1)},
         300.0);

  {
    const int sizes[] = {8, 16, 32};
    std::vector<CheckResult> parts{check_astar_dijkstra(sizes, 500, 4)};
    for (int size : sizes) {
      const Dataset d = dataset(size, 200, static_cast<std::uint64_t>(size));
      parts.push_back(check_oracle_replay(d.train, std::to_string(size) + "x" + std::to_string(size) + "_train"));
      parts.push_back(check_oracle_replay(d.test, std::to_string(size) + "x" + std::to_string(size) + "_test"));
    }
    report(4, parts, 0.0);
  }

  {
    const int fs_[] = {3, 5, 7};
    const int ks[] = {1, 2, 3};
    report(5, {check_propagation_radius(fs_, ks, 32)}, 0.0);
  }

  criterion_training_trend();
  criterion_divergence_marker();
  criterion_pipeline_determinism();

  std::printf("%s: %d criteria failed\n", failures == 0 ? "ALL PASS" : "SOME FAILED", failures);
  return failures == 0 ? 0 : 1;
}
