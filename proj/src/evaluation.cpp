#include "gsvin/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <memory>
#include <thread>

#include "gsvin/binio.hpp"
#include "gsvin/errors.hpp"
#include "gsvin/heuristic.hpp"
#include "gsvin/random.hpp"

namespace gsvin {
namespace {

nlohmann::json optional_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

std::optional<double> optional_from(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return j[key].get<double>();
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string_view mode_name(TrajDiffMode m) { return m == TrajDiffMode::Relative ? "relative" : "absolute"; }

TrajDiffMode parse_mode(const std::string& s) {
  if (s == "relative") return TrajDiffMode::Relative;
  if (s == "absolute") return TrajDiffMode::Absolute;
  throw ValidationError("unknown traj_diff mode '" + s + "'");
}

}  // namespace

void to_json(nlohmann::json& j, const EvalReport& r) {
  j = nlohmann::json{{"accuracy", r.accuracy},
                     {"success_rate", r.success_rate},
                     {"traj_diff", optional_json(r.traj_diff)},
                     {"traj_diff_absolute", optional_json(r.traj_diff_absolute)},
                     {"traj_diff_mode", r.traj_diff_mode},
                     {"samples", r.samples},
                     {"correct", r.correct},
                     {"episodes", r.episodes},
                     {"successes", r.successes},
                     {"step_budget", r.step_budget}};
}

void from_json(const nlohmann::json& j, EvalReport& r) {
  r.accuracy = j.at("accuracy").get<double>();
  r.success_rate = j.at("success_rate").get<double>();
  r.traj_diff = optional_from(j, "traj_diff");
  r.traj_diff_absolute = optional_from(j, "traj_diff_absolute");
  r.traj_diff_mode = j.value("traj_diff_mode", std::string("relative"));
  r.samples = j.at("samples").get<std::size_t>();
  r.correct = j.at("correct").get<std::size_t>();
  r.episodes = j.at("episodes").get<std::size_t>();
  r.successes = j.at("successes").get<std::size_t>();
  r.step_budget = j.at("step_budget").get<int>();
}

Episode rollout(const Policy& policy, const GridMap& map, Cell start, int step_budget) {
  Episode ep;
  Cell at = start;
  while (ep.length < step_budget && at != map.goal()) {
    const int action = policy(map, at);
    if (action < 0 || action >= kNumActions) throw ValidationError("policy returned an invalid action");
    at = map.step(at, action);
    ++ep.length;
  }
  ep.success = at == map.goal();
  return ep;
}

double trajectory_difference(std::span<const Episode> episodes, TrajDiffMode mode) {
  double total = 0.0;
  std::size_t n = 0;
  for (const Episode& e : episodes) {
    if (!e.success) continue;
    const double excess = static_cast<double>(e.length) - static_cast<double>(e.optimal_length);
    total += mode == TrajDiffMode::Relative ? excess / static_cast<double>(e.optimal_length) : excess;
    ++n;
  }
  if (n == 0) throw MetricError("trajectory difference is undefined without successful episodes");
  return total / static_cast<double>(n);
}

double single_step_accuracy(const ModelConfig& config, const ParamSet& params, std::span<const PlanningSample> samples,
                            int chunk_size) {
  if (samples.empty()) throw MetricError("accuracy is undefined on an empty sample set");
  return validate_model(config, params, samples, chunk_size).accuracy;
}

Policy model_policy(const ModelConfig& config, const ParamSet& params) {
  struct Cache {
    GridMap map;
    std::vector<int> grid;
  };
  auto cache = std::make_shared<Cache>();
  return [config, params, cache](const GridMap& map, Cell cell) {
    if (cache->grid.empty() || !(cache->map == map)) {
      cache->map = map;
      cache->grid = policy_grids(config, params, std::span<const GridMap>(&map, 1)).front();
    }
    return cache->grid[map.index(cell)];
  };
}

Policy oracle_policy() {
  return [](const GridMap& map, Cell cell) { return label_sample(map, cell).expert_action; };
}

EvalReport evaluate_policy(const Policy& policy, std::span<const PlanningSample> samples, const EvalOptions& options) {
  if (samples.empty()) throw MetricError("evaluation is undefined on an empty sample set");
  EvalReport r;
  r.traj_diff_mode = std::string(mode_name(options.traj_diff));
  std::vector<Episode> episodes;
  episodes.reserve(samples.size());
  for (const PlanningSample& s : samples) {
    const int budget = options.step_budget > 0 ? options.step_budget : s.map.height() * s.map.width();
    r.step_budget = std::max(r.step_budget, budget);
    Episode e = rollout(policy, s.map, s.agent, budget);
    e.optimal_length = s.optimal_length;
    episodes.push_back(e);
  }
  r.episodes = episodes.size();
  r.successes = static_cast<std::size_t>(std::count_if(episodes.begin(), episodes.end(), [](const Episode& e) { return e.success; }));
  r.success_rate = static_cast<double>(r.successes) / static_cast<double>(r.episodes);
  if (r.successes > 0) {
    r.traj_diff = trajectory_difference(episodes, options.traj_diff);
    r.traj_diff_absolute = trajectory_difference(episodes, TrajDiffMode::Absolute);
  }
  return r;
}

EvalReport evaluate(const ModelConfig& config, const ParamSet& params, std::span<const PlanningSample> samples,
                    const EvalOptions& options) {
  if (samples.empty()) throw MetricError("evaluation is undefined on an empty sample set");
  EvalReport r = evaluate_policy(model_policy(config, params), samples, options);
  const ValidationResult v = validate_model(config, params, samples, options.chunk_size);
  r.samples = samples.size();
  r.accuracy = v.accuracy;
  r.correct = v.correct;
  return r;
}

void to_json(nlohmann::json& j, const SweepSpec& s) {
  j = nlohmann::json{{"variant", variant_name(s.variant)},
                     {"data", s.data},
                     {"f_values", s.f_values},
                     {"k_primes", s.k_primes},
                     {"train", s.train},
                     {"replicates", s.replicates},
                     {"seed", s.seed},
                     {"jobs", s.jobs},
                     {"step_budget", s.eval.step_budget},
                     {"traj_diff_mode", mode_name(s.eval.traj_diff)}};
}

void from_json(const nlohmann::json& j, SweepSpec& s) {
  const SweepSpec d;
  s.variant = parse_variant(j.value("variant", std::string(variant_name(d.variant))));
  s.data = j.value("data", d.data);
  s.f_values = j.value("f_values", d.f_values);
  s.k_primes = j.value("k_primes", d.k_primes);
  s.train = j.value("train", d.train);
  s.replicates = j.value("replicates", d.replicates);
  s.seed = j.value("seed", d.seed);
  s.jobs = j.value("jobs", d.jobs);
  s.eval.step_budget = j.value("step_budget", 0);
  s.eval.traj_diff = parse_mode(j.value("traj_diff_mode", std::string("relative")));
}

std::uint64_t cell_seed(std::uint64_t sweep_seed, int f, std::size_t k_prime_index, int replicate) {
  Rng rng = derive_rng(sweep_seed, {static_cast<std::uint64_t>(f), k_prime_index, static_cast<std::uint64_t>(replicate)});
  return rng();
}

SweepResult run_sweep(const SweepSpec& spec, const Dataset& data) {
  if (spec.f_values.empty() || spec.k_primes.empty() || spec.replicates < 1) {
    throw ValidationError("sweep needs at least one f, one k' and one replicate");
  }
  const int m = spec.data.height;
  const int n = spec.data.width;
  SweepResult result;
  for (std::size_t ki = 0; ki < spec.k_primes.size(); ++ki) {
    for (int f : spec.f_values) {
      const int k = scaled_k(m, n, f, spec.k_primes[ki]);
      for (int rep = 0; rep < spec.replicates; ++rep) {
        SweepRow row;
        row.variant = spec.variant;
        row.m = m;
        row.n = n;
        row.f = f;
        row.k_prime = spec.k_primes[ki];
        row.k = k;
        row.replicate = rep;
        row.seed = cell_seed(spec.seed, f, ki, rep);
        result.rows.push_back(row);
      }
    }
  }

  auto run_cell = [&](SweepRow& row) {
    const auto start = std::chrono::steady_clock::now();
    ModelConfig model;
    model.variant = row.variant;
    model.f = row.f;
    model.k = row.k;
    TrainConfig tc = spec.train;
    tc.seed = row.seed;
    tc.checkpoint_every = 0;
    const TrainState state = train(model, data, tc);
    row.status = state.record.status;
    if (!state.record.diverged()) {
      const auto& eval_set = data.test.empty() ? data.train : data.test;
      row.report = evaluate(model, state.params, eval_set, spec.eval);
    }
    row.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };

  const std::size_t jobs = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(1, spec.jobs)), 1, result.rows.size());
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(jobs);
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < jobs; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = next++; i < result.rows.size(); i = next++) run_cell(result.rows[i]);
        } catch (...) {
          errors[w] = std::current_exception();
          next = result.rows.size();
        }
      });
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return result;
}

std::string sweep_csv(const SweepResult& result) {
  std::string out = "variant,m,n,f,k_prime,k,status,accuracy,success_rate,traj_diff,seed,wall_seconds\n";
  for (const SweepRow& r : result.rows) {
    out += std::string(variant_name(r.variant)) + "," + std::to_string(r.m) + "," + std::to_string(r.n) + "," +
           std::to_string(r.f) + "," + fmt(r.k_prime) + "," + std::to_string(r.k) + "," + r.status + ",";
    if (r.report) {
      out += fmt(r.report->accuracy) + "," + fmt(r.report->success_rate) + "," +
             (r.report->traj_diff ? fmt(*r.report->traj_diff) : std::string("nan")) + ",";
    } else {
      out += "*,*,*,";
    }
    char wall[32];
    std::snprintf(wall, sizeof wall, "%.3f", r.wall_seconds);
    out += std::to_string(r.seed) + "," + wall + "\n";
  }
  return out;
}

namespace {

struct CellStats {
  std::vector<double> accuracy, success, traj;
  int diverged = 0;
};

std::vector<CellStats> group_cells(const SweepSpec& spec, const SweepResult& result) {
  const std::size_t nf = spec.f_values.size();
  std::vector<CellStats> cells(spec.k_primes.size() * nf);
  for (std::size_t i = 0; i < result.rows.size(); ++i) {
    const SweepRow& r = result.rows[i];
    CellStats& c = cells[i / static_cast<std::size_t>(spec.replicates)];
    if (!r.report) {
      ++c.diverged;
      continue;
    }
    c.accuracy.push_back(r.report->accuracy);
    c.success.push_back(r.report->success_rate);
    if (r.report->traj_diff) c.traj.push_back(*r.report->traj_diff);
  }
  return cells;
}

nlohmann::json spread(const std::vector<double>& v) {
  if (v.empty()) return nullptr;
  double sum = 0.0;
  for (double x : v) sum += x;
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  return {{"mean", sum / static_cast<double>(v.size())}, {"min", *lo}, {"max", *hi}, {"range", *hi - *lo}};
}

}  // namespace

nlohmann::json sweep_summary(const SweepSpec& spec, const SweepResult& result) {
  const std::vector<CellStats> cells = group_cells(spec, result);
  nlohmann::json out{{"spec", spec}, {"cells", nlohmann::json::array()}};
  for (std::size_t ki = 0; ki < spec.k_primes.size(); ++ki) {
    for (std::size_t fi = 0; fi < spec.f_values.size(); ++fi) {
      const CellStats& c = cells[ki * spec.f_values.size() + fi];
      out["cells"].push_back({{"f", spec.f_values[fi]},
                              {"k_prime", spec.k_primes[ki]},
                              {"k", scaled_k(spec.data.height, spec.data.width, spec.f_values[fi], spec.k_primes[ki])},
                              {"replicates", spec.replicates},
                              {"diverged", c.diverged},
                              {"accuracy", spread(c.accuracy)},
                              {"success_rate", spread(c.success)},
                              {"traj_diff", spread(c.traj)}});
    }
  }
  return out;
}

std::string k_table(const SweepSpec& spec) {
  std::string out = "k_prime";
  for (int f : spec.f_values) out += ",f=" + std::to_string(f);
  out += "\n";
  for (double kp : spec.k_primes) {
    out += fmt(kp);
    for (int f : spec.f_values) out += "," + std::to_string(scaled_k(spec.data.height, spec.data.width, f, kp));
    out += "\n";
  }
  return out;
}

std::string accuracy_table(const SweepSpec& spec, const SweepResult& result) {
  const std::vector<CellStats> cells = group_cells(spec, result);
  std::string out = "k_prime";
  for (int f : spec.f_values) out += ",f=" + std::to_string(f);
  out += "\n";
  for (std::size_t ki = 0; ki < spec.k_primes.size(); ++ki) {
    out += fmt(spec.k_primes[ki]);
    for (std::size_t fi = 0; fi < spec.f_values.size(); ++fi) {
      const CellStats& c = cells[ki * spec.f_values.size() + fi];
      if (c.accuracy.empty()) {
        out += ",*";
      } else {
        double sum = 0.0;
        for (double a : c.accuracy) sum += a;
        out += "," + fmt(sum / static_cast<double>(c.accuracy.size()));
      }
    }
    out += "\n";
  }
  return out;
}

void write_sweep(const SweepSpec& spec, const SweepResult& result, const std::filesystem::path& dir) {
  write_file(dir / "sweep.csv", sweep_csv(result));
  write_file(dir / "sweep_summary.json", sweep_summary(spec, result).dump(2) + "\n");
  write_file(dir / "k_table.csv", k_table(spec));
  write_file(dir / "accuracy_table.csv", accuracy_table(spec, result));
}

}  // namespace gsvin
