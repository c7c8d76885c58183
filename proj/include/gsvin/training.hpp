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
#include "gsvin/params.hpp"

namespace gsvin {

struct OptimizerSpec {
  std::string name = "rmsprop";
  double decay = 0.9;
  double epsilon = 1e-8;  // added after the square root
  double momentum = 0.0;
  bool operator==(const OptimizerSpec&) const = default;
};

struct DivergenceRules {
  double grad_norm_limit = 1e6;
  double loss_ratio = 100.0;  // against the epoch-1 median batch loss
  int patience = 3;           // consecutive epochs above the ratio
  bool operator==(const DivergenceRules&) const = default;
};

struct TrainConfig {
  int epochs = 30;
  int batch_size = 256;
  double learning_rate = 0.002;
  OptimizerSpec optimizer;
  std::uint64_t seed = 0;
  DivergenceRules divergence;
  double clip_norm = 0.0;    // 0 disables gradient clipping
  int chunk_size = 32;       // samples per tape; the batch gradient is accumulated chunk by chunk
  int checkpoint_every = 0;  // epochs between checkpoints; 0 disables them
  std::filesystem::path checkpoint_dir;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

enum class DivergenceTrigger : std::uint8_t { None, NonFiniteLoss, GradientExplosion, LossBlowup };
std::string_view trigger_name(DivergenceTrigger t);
DivergenceTrigger parse_trigger(std::string_view name);

/// What the monitor remembers between batches and epochs.
struct DivergenceHistory {
  std::optional<double> reference_median;  // epoch-1 median batch loss
  int streak = 0;                          // consecutive epochs above loss_ratio * reference
  bool operator==(const DivergenceHistory&) const = default;
};

void to_json(nlohmann::json& j, const DivergenceHistory& h);
void from_json(const nlohmann::json& j, DivergenceHistory& h);

/// Per-batch check: non-finite loss, or a gradient norm that is non-finite or above the limit.
DivergenceTrigger detect_divergence(double loss, double grad_norm, const DivergenceRules& rules);

/// End-of-epoch check on the median batch loss; updates `history`.
DivergenceTrigger close_epoch(double median_loss, DivergenceHistory& history, const DivergenceRules& rules);

struct EpochStats {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;         // mean batch loss
  double train_loss_median = 0.0;  // median batch loss
  double train_accuracy = 0.0;     // on the training batches, before each update
  double val_loss = 0.0;
  double val_accuracy = 0.0;
  double max_grad_norm = 0.0;
  double wall_seconds = 0.0;
  bool operator==(const EpochStats&) const = default;
};

void to_json(nlohmann::json& j, const EpochStats& e);
void from_json(const nlohmann::json& j, EpochStats& e);

struct RunRecord {
  ModelConfig model;
  TrainConfig train;
  std::string config_hash;  // FNV-1a over the canonical model + train + dataset JSON
  std::vector<EpochStats> epochs;
  std::string status = "completed";  // or "diverged"
  DivergenceTrigger trigger = DivergenceTrigger::None;
  int trigger_epoch = 0;
  int trigger_batch = 0;
  double trigger_value = 0.0;
  std::size_t train_samples = 0;
  std::size_t val_samples = 0;
  double wall_seconds = 0.0;

  bool diverged() const { return status == "diverged"; }
  /// Epoch losses and accuracies only (no timings); used to compare runs.
  std::vector<double> loss_trajectory() const;
};

void to_json(nlohmann::json& j, const RunRecord& r);
void from_json(const nlohmann::json& j, RunRecord& r);

/// One JSON object per epoch, newline-terminated.
std::string run_record_jsonl(const RunRecord& r);

std::string config_hash(const ModelConfig& model, const TrainConfig& train, const DatasetManifest& data);

/// Mean cross-entropy and its gradient over `indices`, accumulated in fixed chunk order.
struct BatchGradient {
  double loss = 0.0;
  std::size_t correct = 0;
  ParamSet grads;
};

BatchGradient batch_gradient(const ModelConfig& model, const ParamSet& params, std::span<const PlanningSample> samples,
                             std::span<const std::size_t> indices, int chunk_size);

double grad_norm(const ParamSet& grads);

/// Optimizer slots use the parameter names; a fresh state is all zeros.
ParamSet zero_slots(const ParamSet& params);

/// ms = decay * ms + (1 - decay) * g^2;  p -= lr * g / (sqrt(ms) + eps)
void rmsprop_step(ParamSet& params, const ParamSet& grads, ParamSet& slots, const OptimizerSpec& spec, double lr);

/// Everything needed to continue a run at an epoch boundary.
struct TrainState {
  ParamSet params;
  ParamSet slots;
  int epochs_done = 0;
  std::uint64_t steps = 0;
  DivergenceHistory history;
  RunRecord record;
};

struct ValidationResult {
  double loss = 0.0;
  double accuracy = 0.0;
  std::size_t correct = 0;
};

/// Forward-only loss and accuracy.
ValidationResult validate_model(const ModelConfig& model, const ParamSet& params, std::span<const PlanningSample> samples,
                                int chunk_size);

/// Fresh state: parameters from init_params(model, train.seed).
TrainState initial_state(const ModelConfig& model, const TrainConfig& train, const DatasetManifest& data);

/// Called after every completed epoch.
using EpochCallback = std::function<void(const TrainState&)>;

/// Runs epochs until train.epochs or divergence. Batch order per epoch comes from (seed, epoch).
TrainState train(const ModelConfig& model, const Dataset& data, const TrainConfig& train,
                 const EpochCallback& on_epoch = {});
/// Continues `state` with the same semantics; straight-through and resumed runs agree bitwise.
TrainState resume(TrainState state, const Dataset& data, const TrainConfig& train, const EpochCallback& on_epoch = {});

/// Writes run.jsonl and run.json into `dir`.
void write_run_record(const RunRecord& record, const std::filesystem::path& dir);

}  // namespace gsvin
