#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "config.hpp"
#include "gsvin/binio.hpp"
#include "gsvin/checkpoint.hpp"
#include "gsvin/checks.hpp"
#include "gsvin/errors.hpp"
#include "gsvin/evaluation.hpp"
#include "gsvin/heuristic.hpp"
#include "gsvin/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace gsvin::cli {
namespace {

constexpr int kExitInternal = 1;
constexpr int kExitUsage = 2;
constexpr int kExitCheckFailure = 3;

class CheckFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> argv;

  json file() const { return config.empty() ? json::object() : load_config(config); }
};

struct DataFlags {
  std::optional<int> size, height, width, maps, pairs, workers;
  std::optional<std::string> density;
  std::optional<double> split;
  std::string data_dir;
};

struct ModelFlags {
  std::optional<std::string> variant;
  std::optional<int> f, k, gs_kernel, hidden;
  std::optional<double> k_prime;
};

struct TrainFlags {
  std::optional<int> epochs, batch, chunk, checkpoint_every;
  std::optional<double> lr, clip;
};

struct EvalFlags {
  std::optional<int> budget;
  std::optional<std::string> traj_diff;
};

DensityRange parse_density(const std::string& text) {
  const auto sep = text.find_first_of(",:");
  try {
    if (sep == std::string::npos) {
      const double v = std::stod(text);
      return {v, v};
    }
    return {std::stod(text.substr(0, sep)), std::stod(text.substr(sep + 1))};
  } catch (const std::logic_error&) {
    throw ValidationError("--density expects 'rho' or 'lo,hi', got '" + text + "'");
  }
}

void add_data_flags(CLI::App* app, DataFlags& d, bool with_dir) {
  app->add_option("--size", d.size, "Square map side (sets height and width)");
  app->add_option("--height", d.height, "Map height");
  app->add_option("--width", d.width, "Map width");
  app->add_option("--maps", d.maps, "Number of maps");
  app->add_option("--pairs", d.pairs, "Agent/goal pairs per map (default 6)");
  app->add_option("--density", d.density, "Obstacle density 'rho' or range 'lo,hi' (default 0.1,0.3)");
  app->add_option("--split", d.split, "Fraction of maps in the training split (default 0.8)");
  app->add_option("--workers", d.workers, "Generation threads (output does not depend on it)");
  if (with_dir) app->add_option("--data", d.data_dir, "Dataset directory written by 'generate' (skips generation)");
}

void add_model_flags(CLI::App* app, ModelFlags& m) {
  app->add_option("--variant", m.variant, "VIN, VIRN or GSVIN");
  app->add_option("--f", m.f, "VI kernel size (odd)");
  app->add_option("--k", m.k, "VI iterations (default: heuristic for the map size)");
  app->add_option("--kprime", m.k_prime, "Multiplier on the heuristic iteration count");
  app->add_option("--gs-kernel", m.gs_kernel, "Gate kernel size (default 3)");
  app->add_option("--hidden", m.hidden, "Reward hidden channels (default 150)");
}

void add_train_flags(CLI::App* app, TrainFlags& t) {
  app->add_option("--epochs", t.epochs, "Training epochs (default 30)");
  app->add_option("--batch", t.batch, "Batch size (default 256)");
  app->add_option("--lr", t.lr, "Learning rate (default 0.002)");
  app->add_option("--clip", t.clip, "Clip the gradient L2 norm (default off)");
  app->add_option("--chunk", t.chunk, "Samples per tape inside a batch (default 32)");
  app->add_option("--checkpoint-every", t.checkpoint_every, "Epochs between checkpoints (default 0 = none)");
}

void add_eval_flags(CLI::App* app, EvalFlags& e) {
  app->add_option("--budget", e.budget, "Rollout step budget (default m*n)");
  app->add_option("--traj-diff", e.traj_diff, "relative or absolute")->check(CLI::IsMember({"relative", "absolute"}));
}

void add_common(CLI::App* app, Common& c, bool out_required) {
  app->add_option("--config", c.config, "JSON or TOML config file (flags override it)");
  auto* out = app->add_option("--out", c.out, "Output directory; nothing is written elsewhere");
  if (out_required) out->required();
  app->add_option("--seed", c.seed, "Seed for every random stream of the run");
}

DatasetManifest resolve_data(const json& file, const DataFlags& d, const Common& c) {
  DatasetManifest m = section(file, "data").get<DatasetManifest>();
  if (d.size) m.height = m.width = *d.size;
  if (d.height) m.height = *d.height;
  if (d.width) m.width = *d.width;
  if (d.maps) m.maps = *d.maps;
  if (d.pairs) m.pairs_per_map = *d.pairs;
  if (d.density) m.density = parse_density(*d.density);
  if (d.split) m.train_fraction = *d.split;
  if (c.seed) m.seed = *c.seed;
  m.validate();
  return m;
}

int resolve_workers(const json& file, const DataFlags& d) {
  if (d.workers) return *d.workers;
  return file.value("workers", 1);
}

ModelConfig resolve_model(const json& file, const ModelFlags& f, int height, int width) {
  const json s = section(file, "model");
  ModelConfig m = s.get<ModelConfig>();
  if (f.variant) m.variant = parse_variant(*f.variant);
  if (f.f) m.f = *f.f;
  if (f.gs_kernel) m.gs_kernel = *f.gs_kernel;
  if (f.hidden) m.reward_hidden = *f.hidden;
  if (f.k) {
    m.k = *f.k;
  } else if (f.k_prime) {
    m.k = scaled_k(height, width, m.f, *f.k_prime);
  } else if (!s.contains("k")) {
    m.k = scaled_k(height, width, m.f, s.value("k_prime", 1.0));
  }
  m.validate();
  return m;
}

TrainConfig resolve_train(const json& file, const TrainFlags& t, const Common& c) {
  TrainConfig tc = section(file, "train").get<TrainConfig>();
  if (t.epochs) tc.epochs = *t.epochs;
  if (t.batch) tc.batch_size = *t.batch;
  if (t.lr) tc.learning_rate = *t.lr;
  if (t.clip) tc.clip_norm = *t.clip;
  if (t.chunk) tc.chunk_size = *t.chunk;
  if (t.checkpoint_every) tc.checkpoint_every = *t.checkpoint_every;
  if (c.seed) tc.seed = *c.seed;
  tc.checkpoint_dir.clear();
  if (tc.checkpoint_every > 0) tc.checkpoint_dir = fs::path(c.out) / "checkpoints";
  tc.validate();
  return tc;
}

EvalOptions resolve_eval(const json& file, const EvalFlags& e) {
  const json s = section(file, "eval");
  EvalOptions o;
  o.step_budget = s.value("step_budget", 0);
  std::string mode = s.value("traj_diff_mode", std::string("relative"));
  if (e.budget) o.step_budget = *e.budget;
  if (e.traj_diff) mode = *e.traj_diff;
  if (mode == "absolute") {
    o.traj_diff = TrajDiffMode::Absolute;
  } else if (mode != "relative") {
    throw ValidationError("traj_diff_mode must be 'relative' or 'absolute'");
  }
  if (o.step_budget < 0) throw ValidationError("step budget must be non-negative");
  return o;
}

json eval_json(const EvalOptions& o) {
  return {{"step_budget", o.step_budget},
          {"traj_diff_mode", o.traj_diff == TrajDiffMode::Relative ? "relative" : "absolute"}};
}

void write_manifest(const Common& c, const std::string& command, json resolved) {
  resolved["command"] = command;
  resolved["argv"] = c.argv;
  resolved["tool"] = "gsvin";
  write_file(fs::path(c.out) / "manifest.json", resolved.dump(2) + "\n");
}

Dataset obtain_dataset(const json& file, const DataFlags& d, const Common& c, DatasetManifest& manifest) {
  if (!d.data_dir.empty()) {
    Dataset data = load_dataset_dir(d.data_dir);
    manifest = data.manifest;
    return data;
  }
  manifest = resolve_data(file, d, c);
  return generate_dataset(manifest, resolve_workers(file, d));
}

void print_report(const EvalReport& r) {
  std::printf("accuracy      %.4f (%zu/%zu)\n", r.accuracy, r.correct, r.samples);
  std::printf("success_rate  %.4f (%zu/%zu, budget %d)\n", r.success_rate, r.successes, r.episodes, r.step_budget);
  if (r.traj_diff) {
    std::printf("traj_diff     %.6f (%s)\n", *r.traj_diff, r.traj_diff_mode.c_str());
  } else {
    std::printf("traj_diff     undefined (no successful episode)\n");
  }
}

// ---- generate ----

int run_generate(const Common& c, const DataFlags& d) {
  const json file = c.file();
  const DatasetManifest m = resolve_data(file, d, c);
  const int workers = resolve_workers(file, d);
  const Dataset data = build_dataset(m, c.out, workers);
  write_manifest(c, "generate", {{"data", m}, {"workers", workers}, {"outputs", {"train.gwds", "test.gwds"}}});
  std::printf("generated %d maps of %dx%d: %zu train samples, %zu test samples -> %s\n", m.maps, m.height, m.width,
              data.train.size(), data.test.size(), c.out.c_str());
  return 0;
}

// ---- train ----

int run_train(const Common& c, const DataFlags& d, const ModelFlags& mf, const TrainFlags& tf,
              const std::string& resume_path) {
  const json file = c.file();
  DatasetManifest manifest;
  const Dataset data = obtain_dataset(file, d, c, manifest);
  const TrainConfig tc = resolve_train(file, tf, c);
  TrainState state;
  ModelConfig model;
  if (!resume_path.empty()) {
    state = load_checkpoint(resume_path);
    model = state.record.model;
  } else {
    model = resolve_model(file, mf, manifest.height, manifest.width);
    state = initial_state(model, tc, manifest);
  }
  write_manifest(c, "train",
                 {{"data", manifest},
                  {"data_dir", d.data_dir},
                  {"model", model},
                  {"train", tc},
                  {"resume", resume_path},
                  {"seeds", {{"data", manifest.seed}, {"train", tc.seed}}},
                  {"outputs", {"model.gsck", "run.jsonl", "run.json"}}});
  std::printf("training %s f=%d k=%d on %zu samples (%zu held out)\n", std::string(variant_name(model.variant)).c_str(),
              model.f, model.k, data.train.size(), data.test.size());
  state = resume(std::move(state), data, tc, [](const TrainState& s) {
    const EpochStats& e = s.record.epochs.back();
    std::printf("epoch %3d  loss %.5f  acc %.4f  val_loss %.5f  val_acc %.4f  (%.1fs)\n", e.epoch, e.train_loss,
                e.train_accuracy, e.val_loss, e.val_accuracy, e.wall_seconds);
    std::fflush(stdout);
  });
  save_checkpoint(fs::path(c.out) / "model.gsck", state);
  write_run_record(state.record, c.out);
  if (state.record.diverged()) {
    std::printf("status diverged (%s at epoch %d, batch %d)\n", std::string(trigger_name(state.record.trigger)).c_str(),
                state.record.trigger_epoch, state.record.trigger_batch);
  } else {
    std::printf("status completed in %.1fs\n", state.record.wall_seconds);
  }
  return 0;
}

// ---- eval ----

int run_eval(const Common& c, const DataFlags& d, const EvalFlags& ef, const std::string& checkpoint,
             const std::string& split, bool oracle) {
  if (d.data_dir.empty()) throw UsageError("eval needs --data");
  if (checkpoint.empty() && !oracle) throw UsageError("eval needs --checkpoint or --oracle");
  const json file = c.file();
  const Dataset data = load_dataset_dir(d.data_dir);
  const std::vector<PlanningSample>& samples = split == "train" ? data.train : data.test;
  const EvalOptions opt = resolve_eval(file, ef);
  EvalReport report;
  json resolved{{"data", data.manifest}, {"data_dir", d.data_dir}, {"split", split}, {"eval", eval_json(opt)}};
  if (oracle) {
    report = evaluate_policy(oracle_policy(), samples, opt);
    report.samples = samples.size();
    report.correct = samples.size();
    report.accuracy = 1.0;
    resolved["policy"] = "oracle";
  } else {
    const TrainState state = load_checkpoint(checkpoint);
    report = evaluate(state.record.model, state.params, samples, opt);
    resolved["policy"] = "model";
    resolved["checkpoint"] = checkpoint;
    resolved["model"] = state.record.model;
  }
  resolved["outputs"] = {"eval.json"};
  write_manifest(c, "eval", resolved);
  write_file(fs::path(c.out) / "eval.json", json(report).dump(2) + "\n");
  print_report(report);
  return 0;
}

// ---- sweep ----

int run_sweep_cmd(const Common& c, const DataFlags& d, const ModelFlags& mf, const TrainFlags& tf, const EvalFlags& ef,
                  const std::vector<int>& f_list, const std::vector<double>& kp_list, std::optional<int> replicates,
                  std::optional<int> jobs) {
  const json file = c.file();
  const json s = section(file, "sweep");
  SweepSpec spec = s.get<SweepSpec>();
  DatasetManifest manifest;
  const Dataset data = obtain_dataset(file, d, c, manifest);
  spec.data = manifest;
  if (mf.variant) {
    spec.variant = parse_variant(*mf.variant);
  } else if (section(file, "model").contains("variant")) {
    spec.variant = parse_variant(section(file, "model")["variant"].get<std::string>());
  }
  if (!f_list.empty()) spec.f_values = f_list;
  if (!kp_list.empty()) spec.k_primes = kp_list;
  if (replicates) spec.replicates = *replicates;
  if (jobs) spec.jobs = *jobs;
  if (c.seed) spec.seed = *c.seed;
  TrainFlags cell_flags = tf;
  cell_flags.checkpoint_every.reset();
  Common cell_common = c;
  spec.train = resolve_train(file, cell_flags, cell_common);
  spec.train.checkpoint_every = 0;
  spec.train.checkpoint_dir.clear();
  spec.eval = resolve_eval(file, ef);
  for (int f : spec.f_values) {
    if (f < 3 || f % 2 == 0) throw ValidationError("sweep f values must be odd and at least 3");
  }
  write_manifest(c, "sweep",
                 {{"sweep", spec},
                  {"data", manifest},
                  {"data_dir", d.data_dir},
                  {"outputs", {"sweep.csv", "sweep_summary.json", "k_table.csv", "accuracy_table.csv"}}});
  std::printf("sweep %s on %dx%d: %zu f x %zu k' x %d replicates\n", std::string(variant_name(spec.variant)).c_str(),
              manifest.height, manifest.width, spec.f_values.size(), spec.k_primes.size(), spec.replicates);
  const SweepResult result = run_sweep(spec, data);
  write_sweep(spec, result, c.out);
  std::printf("iterations k:\n%s\naccuracy (* = diverged):\n%s", k_table(spec).c_str(),
              accuracy_table(spec, result).c_str());
  return 0;
}

// ---- heuristic ----

int run_heuristic(const Common& c, std::optional<int> size, std::optional<int> height, std::optional<int> width,
                  std::vector<int> f_list, std::vector<double> kp_list, bool verify) {
  int m = 32;
  int n = 32;
  if (size) m = n = *size;
  if (height) m = *height;
  if (width) n = *width;
  if (m < 1 || n < 1) throw ValidationError("map size must be positive");
  if (f_list.empty() && kp_list.empty()) {
    f_list.assign(kTable4Kernels.begin(), kTable4Kernels.end());
    kp_list.assign(kTable4KPrimes.begin(), kTable4KPrimes.end());
  } else if (f_list.empty()) {
    f_list.assign(kTable4Kernels.begin(), kTable4Kernels.end());
  } else if (kp_list.empty()) {
    kp_list = {1.0};
  }
  std::vector<std::vector<int>> grid;
  for (double kp : kp_list) {
    std::vector<int> row;
    for (int f : f_list) row.push_back(scaled_k(m, n, f, kp));
    grid.push_back(row);
  }
  if (grid.size() == 1 && grid[0].size() == 1) {
    std::printf("%d\n", grid[0][0]);
  } else {
    std::printf("k for %dx%d\n%8s", m, n, "k'\\f");
    for (int f : f_list) std::printf("%5d", f);
    std::printf("\n");
    for (std::size_t r = 0; r < kp_list.size(); ++r) {
      std::printf("%8g", kp_list[r]);
      for (int k : grid[r]) std::printf("%5d", k);
      std::printf("\n");
    }
  }
  bool ok = true;
  if (verify) {
    const CheckResult r = check_heuristic_table4();
    std::printf("%s %s: %s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str());
    ok = r.passed;
  }
  if (!c.out.empty()) {
    write_manifest(c, "heuristic",
                   {{"height", m}, {"width", n}, {"f_values", f_list}, {"k_primes", kp_list}, {"verify_table4", verify},
                    {"k", grid}, {"verified", ok}});
  }
  if (!ok) throw CheckFailure("heuristic does not reproduce the embedded table");
  return 0;
}

// ---- selfcheck ----

int run_selfcheck(const Common& c, bool quick) {
  const std::uint64_t seed = c.seed.value_or(0);
  const int astar_maps = quick ? 100 : 500;
  std::vector<CheckResult> results;
  auto report = [&](CheckResult r) {
    std::printf("%s %-22s %s (%.2fs)\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str(), r.seconds);
    std::fflush(stdout);
    results.push_back(std::move(r));
  };
  report(check_heuristic_table4());
  report(check_vi_equivalence(50, 16, seed));
  const int fs_[] = {3, 5, 7};
  const int ks_[] = {1, 2, 3};
  report(check_propagation_radius(fs_, ks_, 32));
  for (Variant v : {Variant::VIN, Variant::VIRN, Variant::GSVIN}) report(check_gradients(v, 200, seed));
  const int sizes[] = {8, 16, 32};
  report(check_astar_dijkstra(sizes, astar_maps, seed));
  for (int size : sizes) {
    DatasetManifest m;
    m.height = m.width = size;
    m.maps = quick ? 20 : 100;
    m.seed = seed;
    const Dataset data = generate_dataset(m);
    report(check_oracle_replay(data.train, std::to_string(size) + "_train"));
    report(check_oracle_replay(data.test, std::to_string(size) + "_test"));
  }
  report(check_determinism(seed));
  std::size_t failed = 0;
  json out = json::array();
  for (const CheckResult& r : results) {
    if (!r.passed) ++failed;
    out.push_back({{"name", r.name}, {"passed", r.passed}, {"detail", r.detail}, {"seconds", r.seconds}});
  }
  std::printf("%zu/%zu checks passed\n", results.size() - failed, results.size());
  if (!c.out.empty()) {
    write_manifest(c, "selfcheck", {{"seed", seed}, {"quick", quick}, {"outputs", {"selfcheck.json"}}});
    write_file(fs::path(c.out) / "selfcheck.json", out.dump(2) + "\n");
  }
  if (failed > 0) throw CheckFailure(std::to_string(failed) + " self-check(s) failed");
  return 0;
}

// ---- export ----

std::string csv_field(const json& v) {
  if (v.is_null()) return "";
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

int run_export(const Common& c, const std::vector<std::string>& sources) {
  if (sources.empty()) throw UsageError("export needs at least one --from directory");
  std::string runs = "source,config_hash,variant,f,k,epochs,status,trigger,final_train_loss,final_val_accuracy,wall_seconds\n";
  std::string sweeps;
  std::string evals = "source,policy,accuracy,success_rate,traj_diff,traj_diff_mode,episodes\n";
  json report{{"runs", json::array()}, {"sweeps", json::array()}, {"evals", json::array()}};
  for (const std::string& src : sources) {
    if (!fs::is_directory(src)) throw ValidationError("--from '" + src + "' is not a directory");
    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(src)) {
      if (entry.is_regular_file()) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const fs::path& p : files) {
      const std::string dir = p.parent_path().generic_string();
      if (p.filename() == "run.json") {
        const RunRecord r = json::parse(read_file(p)).get<RunRecord>();
        const EpochStats last = r.epochs.empty() ? EpochStats{} : r.epochs.back();
        char head[256];
        std::snprintf(head, sizeof head, "%s,%s,%s,%d,%d,%zu,%s,%s,", dir.c_str(), r.config_hash.c_str(),
                      std::string(variant_name(r.model.variant)).c_str(), r.model.f, r.model.k, r.epochs.size(),
                      r.status.c_str(), std::string(trigger_name(r.trigger)).c_str());
        char tail[96];
        if (r.diverged()) {
          std::snprintf(tail, sizeof tail, "*,*,%.3f\n", r.wall_seconds);
        } else {
          std::snprintf(tail, sizeof tail, "%.10g,%.10g,%.3f\n", last.train_loss, last.val_accuracy, r.wall_seconds);
        }
        runs += std::string(head) + tail;
        report["runs"].push_back({{"source", dir}, {"record", json(r)}});
      } else if (p.filename() == "sweep.csv") {
        const std::string text = read_file(p);
        std::size_t pos = text.find('\n');
        if (pos == std::string::npos) continue;
        if (sweeps.empty()) sweeps = "source," + text.substr(0, pos + 1);
        for (std::size_t start = pos + 1; start < text.size();) {
          const std::size_t end = text.find('\n', start);
          const std::string row = text.substr(start, end - start);
          if (!row.empty()) sweeps += dir + "," + row + "\n";
          if (end == std::string::npos) break;
          start = end + 1;
        }
        report["sweeps"].push_back(dir);
      } else if (p.filename() == "eval.json") {
        const json e = json::parse(read_file(p));
        std::string policy = "model";
        const fs::path manifest = p.parent_path() / "manifest.json";
        if (fs::exists(manifest)) policy = json::parse(read_file(manifest)).value("policy", policy);
        evals += dir + "," + policy + "," + csv_field(e["accuracy"]) + "," + csv_field(e["success_rate"]) + "," +
                 csv_field(e["traj_diff"]) + "," + csv_field(e["traj_diff_mode"]) + "," + csv_field(e["episodes"]) + "\n";
        report["evals"].push_back({{"source", dir}, {"report", e}});
      }
    }
  }
  const fs::path out(c.out);
  write_file(out / "runs.csv", runs);
  write_file(out / "evals.csv", evals);
  if (!sweeps.empty()) write_file(out / "sweeps.csv", sweeps);
  write_file(out / "report.json", report.dump(2) + "\n");
  write_manifest(c, "export", {{"from", sources}, {"outputs", {"runs.csv", "evals.csv", "sweeps.csv", "report.json"}}});
  std::printf("exported %zu runs, %zu sweeps, %zu evals -> %s\n", report["runs"].size(), report["sweeps"].size(),
              report["evals"].size(), c.out.c_str());
  return 0;
}

int run(int argc, char** argv) {
  CLI::App app{"Value iteration network toolkit: datasets, training, evaluation, sweeps"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every subcommand");

  Common common;
  common.argv.assign(argv, argv + argc);
  DataFlags data;
  ModelFlags model;
  TrainFlags train_flags;
  EvalFlags eval_flags;

  auto* gen = app.add_subcommand("generate", "Generate a grid-world dataset (train.gwds, test.gwds)");
  add_common(gen, common, true);
  add_data_flags(gen, data, false);

  auto* tr = app.add_subcommand("train", "Train a planner by imitation of A* labels");
  add_common(tr, common, true);
  add_data_flags(tr, data, true);
  add_model_flags(tr, model);
  add_train_flags(tr, train_flags);
  std::string resume_path;
  tr->add_option("--resume", resume_path, "Continue from a checkpoint");

  auto* ev = app.add_subcommand("eval", "Accuracy, success rate and trajectory difference");
  add_common(ev, common, true);
  ev->add_option("--data", data.data_dir, "Dataset directory")->required();
  std::string checkpoint;
  std::string split = "test";
  bool oracle = false;
  ev->add_option("--checkpoint", checkpoint, "Model checkpoint");
  ev->add_option("--split", split, "train or test")->check(CLI::IsMember({"train", "test"}));
  ev->add_flag("--oracle", oracle, "Teacher-forced expert rollouts instead of a model");
  add_eval_flags(ev, eval_flags);

  auto* sw = app.add_subcommand("sweep", "Train and evaluate one model per (f, k') cell");
  add_common(sw, common, true);
  add_data_flags(sw, data, true);
  sw->add_option("--variant", model.variant, "VIN, VIRN or GSVIN");
  add_train_flags(sw, train_flags);
  add_eval_flags(sw, eval_flags);
  std::vector<int> f_list;
  std::vector<double> kp_list;
  std::optional<int> replicates;
  std::optional<int> jobs;
  sw->add_option("--f-list", f_list, "Kernel sizes")->delimiter(',');
  sw->add_option("--kprime-list", kp_list, "Iteration coefficients")->delimiter(',');
  sw->add_option("--replicates", replicates, "Runs per cell");
  sw->add_option("--jobs", jobs, "Cells trained concurrently");

  auto* he = app.add_subcommand("heuristic", "Print adaptive iteration counts");
  add_common(he, common, false);
  std::optional<int> hsize, hheight, hwidth;
  std::vector<int> hf;
  std::vector<double> hkp;
  bool verify = false;
  he->add_option("--size", hsize, "Square map side (default 32)");
  he->add_option("--height", hheight, "Map height");
  he->add_option("--width", hwidth, "Map width");
  he->add_option("--f,--f-list", hf, "Kernel sizes")->delimiter(',');
  he->add_option("--kprime-list,--kprime", hkp, "Iteration coefficients")->delimiter(',');
  he->add_flag("--verify-table4", verify, "Compare against the embedded 32x32 table; exit 3 on mismatch");

  auto* sc = app.add_subcommand("selfcheck", "Gradient, oracle-equivalence and determinism suites");
  add_common(sc, common, false);
  bool quick = false;
  sc->add_flag("--quick", quick, "Smaller instance counts");

  auto* ex = app.add_subcommand("export", "Collect run records, evaluations and sweep tables into one report");
  add_common(ex, common, true);
  std::vector<std::string> sources;
  ex->add_option("--from", sources, "Directories to scan (repeatable)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  if (gen->parsed()) return run_generate(common, data);
  if (tr->parsed()) return run_train(common, data, model, train_flags, resume_path);
  if (ev->parsed()) return run_eval(common, data, eval_flags, checkpoint, split, oracle);
  if (sw->parsed()) return run_sweep_cmd(common, data, model, train_flags, eval_flags, f_list, kp_list, replicates, jobs);
  if (he->parsed()) return run_heuristic(common, hsize, hheight, hwidth, hf, hkp, verify);
  if (sc->parsed()) return run_selfcheck(common, quick);
  if (ex->parsed()) return run_export(common, sources);
  return kExitUsage;
}

}  // namespace
}  // namespace gsvin::cli

int main(int argc, char** argv) {
  using namespace gsvin;
  try {
    return cli::run(argc, argv);
  } catch (const cli::CheckFailure& e) {
    std::cerr << "check failed: " << e.what() << "\n";
    return cli::kExitCheckFailure;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return cli::kExitUsage;
  } catch (const ValidationError& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return cli::kExitUsage;
  } catch (const ShapeError& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return cli::kExitUsage;
  } catch (const GenerationError& e) {
    std::cerr << "generation error: " << e.what() << "\n";
    return cli::kExitUsage;
  } catch (const FormatError& e) {
    std::cerr << "unreadable file: " << e.what() << "\n";
    return cli::kExitUsage;
  } catch (const MetricError& e) {
    std::cerr << "undefined metric: " << e.what() << "\n";
    return cli::kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return cli::kExitInternal;
  }
}
