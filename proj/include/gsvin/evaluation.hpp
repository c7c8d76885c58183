#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gsvin/dataset.hpp"
#include "gsvin/model.hpp"
#include "gsvin/training.hpp"

namespace gsvin {

enum class TrajDiffMode : std::uint8_t { Relative, Absolute };

struct EvalOptions {
  int step_budget = 0;  // 0 means m * n
  TrajDiffMode traj_diff = TrajDiffMode::Relative;
  int chunk_size = 64;
};

struct EvalReport {
  double accuracy = 0.0;
  double success_rate = 0.0;
  std::optional<double> traj_diff;           // in the requested mode; empty without successes
  std::optional<double> traj_diff_absolute;  // mean excess steps over successes
  std::string traj_diff_mode = "relative";
  std::size_t samples = 0;
  std::size_t correct = 0;
  std::size_t episodes = 0;
  std::size_t successes = 0;
  int step_budget = 0;
  bool operator==(const EvalReport&) const = default;
};

void to_json(nlohmann::json& j, const EvalReport& r);
void from_json(const nlohmann::json& j, EvalReport& r);

struct Episode {
  bool success = false;
  int length = 0;  // steps taken (equals the budget on failure)
  std::uint32_t optimal_length = 0;
  bool operator==(const Episode&) const = default;
};

/// Action chosen at `cell` on `map`.
using Policy = std::function<int(const GridMap& map, Cell cell)>;

/// Applies `policy` from `start` until the goal is reached or `step_budget` steps are spent.
/// Blocked moves leave the agent in place and still consume a step.
Episode rollout(const Policy& policy, const GridMap& map, Cell start, int step_budget);

/// Mean over successful episodes of (len - opt) / opt, or of (len - opt) in Absolute mode.
/// Throws MetricError when no episode succeeded.
double trajectory_difference(std::span<const Episode> episodes, TrajDiffMode mode = TrajDiffMode::Relative);

/// Fraction of samples whose argmax logit (lowest index on ties) equals the expert action.
/// Throws MetricError on an empty set.
double single_step_accuracy(const ModelConfig& config, const ParamSet& params, std::span<const PlanningSample> samples,
                            int chunk_size = 64);

/// Greedy model policy; the per-map action grid is computed once per distinct map.
Policy model_policy(const ModelConfig& config, const ParamSet& params);

/// Teacher forcing: the first A* move from the current cell.
Policy oracle_policy();

/// Rolls out `policy` from every sample start and fills the rollout fields of the report.
EvalReport evaluate_policy(const Policy& policy, std::span<const PlanningSample> samples, const EvalOptions& options = {});

/// Accuracy plus rollouts of the model's greedy policy.
EvalReport evaluate(const ModelConfig& config, const ParamSet& params, std::span<const PlanningSample> samples,
                    const EvalOptions& options = {});

struct SweepSpec {
  Variant variant = Variant::GSVIN;
  DatasetManifest data;                   // map size and generation settings shared by every cell
  std::vector<int> f_values{3, 5, 7, 9, 11, 13, 15};
  std::vector<double> k_primes{0.5, 0.75, 1.0, 1.25, 1.5, 2.0};
  TrainConfig train;                      // per-cell settings; the seed is replaced by a derived one
  int replicates = 1;
  std::uint64_t seed = 0;
  int jobs = 1;                           // cells trained concurrently
  EvalOptions eval;
};

void to_json(nlohmann::json& j, const SweepSpec& s);
void from_json(const nlohmann::json& j, SweepSpec& s);

struct SweepRow {
  Variant variant = Variant::GSVIN;
  int m = 0;
  int n = 0;
  int f = 0;
  double k_prime = 0.0;
  int k = 0;
  int replicate = 0;
  std::uint64_t seed = 0;
  std::string status;
  std::optional<EvalReport> report;  // empty for diverged cells
  double wall_seconds = 0.0;
};

struct SweepResult {
  std::vector<SweepRow> rows;  // ordered by (k', f, replicate)
};

/// Seed for a (f, k' index, replicate) cell.
std::uint64_t cell_seed(std::uint64_t sweep_seed, int f, std::size_t k_prime_index, int replicate);

/// Trains and evaluates one fresh model per cell and replicate on the shared dataset.
/// A diverged cell is recorded and never aborts the grid.
SweepResult run_sweep(const SweepSpec& spec, const Dataset& data);

/// CSV columns: variant,m,n,f,k_prime,k,status,accuracy,success_rate,traj_diff,seed,wall_seconds.
/// Diverged rows carry "*" in every metric column.
std::string sweep_csv(const SweepResult& result);
/// Per-cell mean, min, max over completed replicates.
nlohmann::json sweep_summary(const SweepSpec& spec, const SweepResult& result);
/// Rows k', columns f: the iteration count used by each cell.
std::string k_table(const SweepSpec& spec);
/// Rows k', columns f: mean accuracy, or "*" when every replicate diverged.
std::string accuracy_table(const SweepSpec& spec, const SweepResult& result);

/// Writes sweep.csv, sweep_summary.json, k_table.csv and accuracy_table.csv.
void write_sweep(const SweepSpec& spec, const SweepResult& result, const std::filesystem::path& dir);

}  // namespace gsvin
