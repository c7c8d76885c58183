#include "gsvin/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "gsvin/binio.hpp"
#include "gsvin/checkpoint.hpp"
#include "gsvin/errors.hpp"
#include "gsvin/random.hpp"

namespace gsvin {
namespace {

constexpr std::uint64_t kShuffleStream = 0x5348554646ULL;

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t mid = v.size() / 2;
  return v.size() % 2 == 1 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, int epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = derive_rng(seed, {kShuffleStream, static_cast<std::uint64_t>(epoch)});
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[uniform_below(rng, i)]);
  return order;
}

std::vector<Var> bind_in_layout_order(Tape& tape, const ModelConfig& model, const ParamSet& params, bool trainable) {
  std::vector<Var> vars;
  const ParamSet layout = zero_params(model);
  for (const NamedTensor& e : layout.entries()) {
    const Tensor& value = params.get(e.name);
    require_same_shape(value.shape(), e.value.shape(), e.name.c_str());
    vars.push_back(trainable ? tape.parameter(value) : tape.constant(value));
  }
  return vars;
}

std::size_t count_correct(const Tensor& logits, std::span<const int> labels) {
  const std::size_t actions = logits.shape().channels;
  std::size_t correct = 0;
  for (std::size_t b = 0; b < labels.size(); ++b) {
    const std::span<const double> row(logits.ptr() + b * actions, actions);
    if (argmax_action(row) == labels[b]) ++correct;
  }
  return correct;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 0) throw ValidationError("epochs must be non-negative");
  if (batch_size < 1) throw ValidationError("batch size must be positive");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ValidationError("learning rate must be positive");
  if (optimizer.name != "rmsprop") throw ValidationError("unsupported optimizer '" + optimizer.name + "'");
  if (!(optimizer.decay >= 0.0 && optimizer.decay < 1.0)) throw ValidationError("rmsprop decay must lie in [0, 1)");
  if (!(optimizer.epsilon > 0.0)) throw ValidationError("rmsprop epsilon must be positive");
  if (optimizer.momentum != 0.0) throw ValidationError("rmsprop momentum is not supported");
  if (clip_norm < 0.0) throw ValidationError("clip norm must be non-negative");
  if (chunk_size < 1) throw ValidationError("chunk size must be positive");
  if (checkpoint_every < 0) throw ValidationError("checkpoint cadence must be non-negative");
  if (checkpoint_every > 0 && checkpoint_dir.empty()) throw ValidationError("checkpoints need a directory");
  if (!(divergence.grad_norm_limit > 0.0) || !(divergence.loss_ratio > 0.0) || divergence.patience < 1) {
    throw ValidationError("invalid divergence rules");
  }
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"epochs", c.epochs},
                     {"batch_size", c.batch_size},
                     {"learning_rate", c.learning_rate},
                     {"optimizer",
                      {{"name", c.optimizer.name},
                       {"decay", c.optimizer.decay},
                       {"epsilon", c.optimizer.epsilon},
                       {"momentum", c.optimizer.momentum}}},
                     {"seed", c.seed},
                     {"divergence",
                      {{"grad_norm_limit", c.divergence.grad_norm_limit},
                       {"loss_ratio", c.divergence.loss_ratio},
                       {"patience", c.divergence.patience}}},
                     {"clip_norm", c.clip_norm},
                     {"chunk_size", c.chunk_size},
                     {"checkpoint_every", c.checkpoint_every},
                     {"checkpoint_dir", c.checkpoint_dir.generic_string()}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  const TrainConfig d;
  c.epochs = j.value("epochs", d.epochs);
  c.batch_size = j.value("batch_size", d.batch_size);
  c.learning_rate = j.value("learning_rate", d.learning_rate);
  const nlohmann::json opt = j.value("optimizer", nlohmann::json::object());
  c.optimizer.name = opt.value("name", d.optimizer.name);
  c.optimizer.decay = opt.value("decay", d.optimizer.decay);
  c.optimizer.epsilon = opt.value("epsilon", d.optimizer.epsilon);
  c.optimizer.momentum = opt.value("momentum", d.optimizer.momentum);
  c.seed = j.value("seed", d.seed);
  const nlohmann::json div = j.value("divergence", nlohmann::json::object());
  c.divergence.grad_norm_limit = div.value("grad_norm_limit", d.divergence.grad_norm_limit);
  c.divergence.loss_ratio = div.value("loss_ratio", d.divergence.loss_ratio);
  c.divergence.patience = div.value("patience", d.divergence.patience);
  c.clip_norm = j.value("clip_norm", d.clip_norm);
  c.chunk_size = j.value("chunk_size", d.chunk_size);
  c.checkpoint_every = j.value("checkpoint_every", d.checkpoint_every);
  c.checkpoint_dir = j.value("checkpoint_dir", std::string());
}

std::string_view trigger_name(DivergenceTrigger t) {
  switch (t) {
    case DivergenceTrigger::None:
      return "none";
    case DivergenceTrigger::NonFiniteLoss:
      return "nan_loss";
    case DivergenceTrigger::GradientExplosion:
      return "grad_norm";
    case DivergenceTrigger::LossBlowup:
      return "loss_blowup";
  }
  return "none";
}

DivergenceTrigger parse_trigger(std::string_view name) {
  for (auto t : {DivergenceTrigger::None, DivergenceTrigger::NonFiniteLoss, DivergenceTrigger::GradientExplosion,
                 DivergenceTrigger::LossBlowup}) {
    if (trigger_name(t) == name) return t;
  }
  throw FormatError("unknown divergence trigger '" + std::string(name) + "'");
}

void to_json(nlohmann::json& j, const DivergenceHistory& h) {
  j = nlohmann::json{{"streak", h.streak}};
  j["reference_median"] = h.reference_median ? nlohmann::json(*h.reference_median) : nlohmann::json(nullptr);
}

void from_json(const nlohmann::json& j, DivergenceHistory& h) {
  h.streak = j.value("streak", 0);
  h.reference_median.reset();
  if (j.contains("reference_median") && !j["reference_median"].is_null()) {
    h.reference_median = j["reference_median"].get<double>();
  }
}

DivergenceTrigger detect_divergence(double loss, double grad_norm, const DivergenceRules& rules) {
  if (!std::isfinite(loss)) return DivergenceTrigger::NonFiniteLoss;
  if (!std::isfinite(grad_norm) || grad_norm > rules.grad_norm_limit) return DivergenceTrigger::GradientExplosion;
  return DivergenceTrigger::None;
}

DivergenceTrigger close_epoch(double median_loss, DivergenceHistory& history, const DivergenceRules& rules) {
  if (!history.reference_median) {
    history.reference_median = median_loss;
    history.streak = 0;
    return DivergenceTrigger::None;
  }
  if (median_loss > rules.loss_ratio * *history.reference_median) {
    ++history.streak;
  } else {
    history.streak = 0;
  }
  return history.streak >= rules.patience ? DivergenceTrigger::LossBlowup : DivergenceTrigger::None;
}

void to_json(nlohmann::json& j, const EpochStats& e) {
  j = nlohmann::json{{"epoch", e.epoch},
                     {"train_loss", e.train_loss},
                     {"train_loss_median", e.train_loss_median},
                     {"train_accuracy", e.train_accuracy},
                     {"val_loss", e.val_loss},
                     {"val_accuracy", e.val_accuracy},
                     {"max_grad_norm", e.max_grad_norm},
                     {"wall_seconds", e.wall_seconds}};
}

void from_json(const nlohmann::json& j, EpochStats& e) {
  e.epoch = j.at("epoch").get<int>();
  e.train_loss = j.at("train_loss").get<double>();
  e.train_loss_median = j.at("train_loss_median").get<double>();
  e.train_accuracy = j.at("train_accuracy").get<double>();
  e.val_loss = j.at("val_loss").get<double>();
  e.val_accuracy = j.at("val_accuracy").get<double>();
  e.max_grad_norm = j.at("max_grad_norm").get<double>();
  e.wall_seconds = j.value("wall_seconds", 0.0);
}

std::vector<double> RunRecord::loss_trajectory() const {
  std::vector<double> out;
  for (const EpochStats& e : epochs) {
    out.insert(out.end(), {e.train_loss, e.train_loss_median, e.train_accuracy, e.val_loss, e.val_accuracy});
  }
  return out;
}

void to_json(nlohmann::json& j, const RunRecord& r) {
  j = nlohmann::json{{"model", r.model},
                     {"train", r.train},
                     {"config_hash", r.config_hash},
                     {"epochs", r.epochs},
                     {"status", r.status},
                     {"trigger", trigger_name(r.trigger)},
                     {"trigger_epoch", r.trigger_epoch},
                     {"trigger_batch", r.trigger_batch},
                     {"train_samples", r.train_samples},
                     {"val_samples", r.val_samples},
                     {"wall_seconds", r.wall_seconds}};
  // A non-finite trigger value (NaN loss) is stored as a string so the JSON stays valid.
  if (std::isfinite(r.trigger_value)) {
    j["trigger_value"] = r.trigger_value;
  } else {
    j["trigger_value"] = std::isnan(r.trigger_value) ? "nan" : (r.trigger_value > 0 ? "inf" : "-inf");
  }
}

void from_json(const nlohmann::json& j, RunRecord& r) {
  r.model = j.at("model").get<ModelConfig>();
  r.train = j.at("train").get<TrainConfig>();
  r.config_hash = j.at("config_hash").get<std::string>();
  r.epochs = j.at("epochs").get<std::vector<EpochStats>>();
  r.status = j.at("status").get<std::string>();
  r.trigger = parse_trigger(j.at("trigger").get<std::string>());
  r.trigger_epoch = j.value("trigger_epoch", 0);
  r.trigger_batch = j.value("trigger_batch", 0);
  r.train_samples = j.value("train_samples", std::size_t{0});
  r.val_samples = j.value("val_samples", std::size_t{0});
  r.wall_seconds = j.value("wall_seconds", 0.0);
  const nlohmann::json& tv = j.at("trigger_value");
  if (tv.is_string()) {
    r.trigger_value = std::stod(tv.get<std::string>());
  } else {
    r.trigger_value = tv.get<double>();
  }
}

std::string run_record_jsonl(const RunRecord& r) {
  std::string out;
  for (const EpochStats& e : r.epochs) {
    nlohmann::json line = e;
    line["config_hash"] = r.config_hash;
    out += line.dump();
    out += '\n';
  }
  return out;
}

std::string config_hash(const ModelConfig& model, const TrainConfig& train, const DatasetManifest& data) {
  nlohmann::json j{{"model", model}, {"train", train}, {"data", data}};
  // Where checkpoints go does not change the run.
  j["train"].erase("checkpoint_dir");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : j.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return hex64(h);
}

BatchGradient batch_gradient(const ModelConfig& model, const ParamSet& params, std::span<const PlanningSample> samples,
                             std::span<const std::size_t> indices, int chunk_size) {
  if (indices.empty()) throw UsageError("batch_gradient: empty batch");
  BatchGradient out;
  out.grads = zero_params(model);
  const std::size_t n = indices.size();
  const auto chunk = static_cast<std::size_t>(std::max(1, chunk_size));
  for (std::size_t begin = 0; begin < n; begin += chunk) {
    const std::size_t count = std::min(chunk, n - begin);
    const Batch batch = make_batch(samples, indices.subspan(begin, count));
    Tape tape;
    const std::vector<Var> vars = bind_in_layout_order(tape, model, params, true);
    const Var logits = forward(tape, model, vars_in_order(model, vars), tape.constant(batch.input), batch.agents);
    const Var loss = tape.softmax_cross_entropy(logits, batch.labels);
    const double weight = static_cast<double>(count) / static_cast<double>(n);
    out.loss += weight * tape.value(loss)[0];
    out.correct += count_correct(tape.value(logits), batch.labels);
    if (!std::isfinite(tape.value(loss)[0])) continue;
    tape.backward(loss);
    for (std::size_t p = 0; p < vars.size(); ++p) {
      const Tensor& g = tape.grad(vars[p]);
      Tensor& acc = out.grads.entries()[p].value;
      for (std::size_t i = 0; i < g.size(); ++i) acc[i] += weight * g[i];
    }
  }
  return out;
}

double grad_norm(const ParamSet& grads) {
  double s = 0.0;
  for (const NamedTensor& e : grads.entries()) {
    for (double g : e.value.data()) s += g * g;
  }
  return std::sqrt(s);
}

ParamSet zero_slots(const ParamSet& params) {
  ParamSet slots;
  for (const NamedTensor& e : params.entries()) slots.add(e.name, Tensor(e.value.shape()));
  return slots;
}

void rmsprop_step(ParamSet& params, const ParamSet& grads, ParamSet& slots, const OptimizerSpec& spec, double lr) {
  for (NamedTensor& e : params.entries()) {
    const Tensor& g = grads.get(e.name);
    Tensor& ms = slots.get(e.name);
    require_same_shape(g.shape(), e.value.shape(), "rmsprop gradient");
    require_same_shape(ms.shape(), e.value.shape(), "rmsprop slot");
    for (std::size_t i = 0; i < g.size(); ++i) {
      ms[i] = spec.decay * ms[i] + (1.0 - spec.decay) * g[i] * g[i];
      e.value[i] -= lr * g[i] / (std::sqrt(ms[i]) + spec.epsilon);
    }
  }
}

ValidationResult validate_model(const ModelConfig& model, const ParamSet& params, std::span<const PlanningSample> samples,
                                int chunk_size) {
  ValidationResult out;
  if (samples.empty()) return out;
  const std::size_t n = samples.size();
  const auto chunk = static_cast<std::size_t>(std::max(1, chunk_size));
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::size_t correct = 0;
  for (std::size_t begin = 0; begin < n; begin += chunk) {
    const std::size_t count = std::min(chunk, n - begin);
    const Batch batch = make_batch(samples, std::span<const std::size_t>(all).subspan(begin, count));
    Tape tape;
    const std::vector<Var> vars = bind_in_layout_order(tape, model, params, false);
    const Var logits = forward(tape, model, vars_in_order(model, vars), tape.constant(batch.input), batch.agents);
    const Var loss = tape.softmax_cross_entropy(logits, batch.labels);
    out.loss += static_cast<double>(count) / static_cast<double>(n) * tape.value(loss)[0];
    correct += count_correct(tape.value(logits), batch.labels);
  }
  out.correct = correct;
  out.accuracy = static_cast<double>(correct) / static_cast<double>(n);
  return out;
}

TrainState initial_state(const ModelConfig& model, const TrainConfig& train, const DatasetManifest& data) {
  model.validate();
  train.validate();
  TrainState s;
  s.params = init_params(model, train.seed);
  s.slots = zero_slots(s.params);
  s.record.model = model;
  s.record.train = train;
  s.record.config_hash = config_hash(model, train, data);
  return s;
}

TrainState train(const ModelConfig& model, const Dataset& data, const TrainConfig& train,
                 const EpochCallback& on_epoch) {
  return resume(initial_state(model, train, data.manifest), data, train, on_epoch);
}

TrainState resume(TrainState state, const Dataset& data, const TrainConfig& train, const EpochCallback& on_epoch) {
  train.validate();
  const ModelConfig& model = state.record.model;
  if (data.train.empty()) throw ValidationError("training split is empty");
  if (data.train.front().map.height() != data.manifest.height || data.train.front().map.width() != data.manifest.width) {
    throw ShapeError("dataset samples do not match the manifest map size");
  }
  RunRecord& record = state.record;
  record.train = train;
  record.config_hash = config_hash(model, train, data.manifest);
  record.train_samples = data.train.size();
  record.val_samples = data.test.size();
  if (record.diverged()) return state;

  using Clock = std::chrono::steady_clock;
  const auto batch = static_cast<std::size_t>(train.batch_size);
  const std::size_t n = data.train.size();
  while (state.epochs_done < train.epochs) {
    const auto epoch_start = Clock::now();
    const int epoch = state.epochs_done + 1;
    const std::vector<std::size_t> order = epoch_order(n, train.seed, epoch);
    std::vector<double> losses;
    std::size_t correct = 0;
    double max_norm = 0.0;
    int batch_index = 0;
    for (std::size_t begin = 0; begin < n; begin += batch, ++batch_index) {
      const std::span<const std::size_t> idx = std::span<const std::size_t>(order).subspan(begin, std::min(batch, n - begin));
      BatchGradient bg = batch_gradient(model, state.params, data.train, idx, train.chunk_size);
      const double norm = std::isfinite(bg.loss) ? grad_norm(bg.grads) : 0.0;
      const DivergenceTrigger trig = detect_divergence(bg.loss, norm, train.divergence);
      if (trig != DivergenceTrigger::None) {
        record.status = "diverged";
        record.trigger = trig;
        record.trigger_epoch = epoch;
        record.trigger_batch = batch_index + 1;
        record.trigger_value = trig == DivergenceTrigger::NonFiniteLoss ? bg.loss : norm;
        record.wall_seconds += std::chrono::duration<double>(Clock::now() - epoch_start).count();
        return state;
      }
      if (train.clip_norm > 0.0 && norm > train.clip_norm) {
        const double scale = train.clip_norm / norm;
        for (NamedTensor& e : bg.grads.entries()) {
          for (double& g : e.value.data()) g *= scale;
        }
      }
      rmsprop_step(state.params, bg.grads, state.slots, train.optimizer, train.learning_rate);
      ++state.steps;
      losses.push_back(bg.loss);
      correct += bg.correct;
      max_norm = std::max(max_norm, norm);
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = std::accumulate(losses.begin(), losses.end(), 0.0) / static_cast<double>(losses.size());
    stats.train_loss_median = median_of(losses);
    stats.train_accuracy = static_cast<double>(correct) / static_cast<double>(n);
    const ValidationResult val = validate_model(model, state.params, data.test, train.chunk_size);
    stats.val_loss = val.loss;
    stats.val_accuracy = val.accuracy;
    stats.max_grad_norm = max_norm;
    stats.wall_seconds = std::chrono::duration<double>(Clock::now() - epoch_start).count();
    record.epochs.push_back(stats);
    record.wall_seconds += stats.wall_seconds;
    state.epochs_done = epoch;

    const DivergenceTrigger trig = close_epoch(stats.train_loss_median, state.history, train.divergence);
    if (trig != DivergenceTrigger::None) {
      record.status = "diverged";
      record.trigger = trig;
      record.trigger_epoch = epoch;
      record.trigger_batch = 0;
      record.trigger_value = stats.train_loss_median;
      if (on_epoch) on_epoch(state);
      return state;
    }
    if (train.checkpoint_every > 0 && epoch % train.checkpoint_every == 0) {
      char name[32];
      std::snprintf(name, sizeof name, "epoch-%04d.gsck", epoch);
      save_checkpoint(train.checkpoint_dir / name, state);
    }
    if (on_epoch) on_epoch(state);
  }
  return state;
}

void write_run_record(const RunRecord& record, const std::filesystem::path& dir) {
  write_file(dir / "run.jsonl", run_record_jsonl(record));
  write_file(dir / "run.json", nlohmann::json(record).dump(2) + "\n");
}

}  // namespace gsvin
