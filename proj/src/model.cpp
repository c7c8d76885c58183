#include "gsvin/model.hpp"

#include <algorithm>
#include <cctype>
#include <random>
#include <string>

#include "gsvin/errors.hpp"
#include "gsvin/heuristic.hpp"

namespace gsvin {

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::VIN:
      return "VIN";
    case Variant::VIRN:
      return "VIRN";
    case Variant::GSVIN:
      return "GSVIN";
  }
  return "?";
}

Variant parse_variant(std::string_view name) {
  std::string key;
  for (char c : name) {
    if (c != '-' && c != '_') key.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  }
  if (key == "VIN") return Variant::VIN;
  if (key == "VIRN") return Variant::VIRN;
  if (key == "GSVIN") return Variant::GSVIN;
  throw ValidationError("unknown model variant '" + std::string(name) + "'");
}

void ModelConfig::validate() const {
  if (f < 1 || f % 2 == 0) throw ValidationError("VI kernel size must be odd and positive");
  if (k < 1) throw ValidationError("iteration count must be at least 1");
  if (reward_hidden < 1) throw ValidationError("reward hidden width must be positive");
  if (reward_kernel < 1 || reward_kernel % 2 == 0) throw ValidationError("reward kernel size must be odd");
  if (actions != kNumActions) throw ValidationError("grid domain uses exactly 8 actions");
  if (gs_kernel < 1 || gs_kernel % 2 == 0) throw ValidationError("gate kernel size must be odd");
  if (!(init_std > 0.0)) throw ValidationError("init std must be positive");
}

ModelConfig ModelConfig::for_map(Variant variant, int height, int width, int f, double k_prime) {
  ModelConfig c;
  c.variant = variant;
  c.f = f;
  c.k = scaled_k(height, width, f, k_prime);
  return c;
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"variant", variant_name(c.variant)},
                     {"f", c.f},
                     {"k", c.k},
                     {"reward_hidden", c.reward_hidden},
                     {"reward_kernel", c.reward_kernel},
                     {"actions", c.actions},
                     {"leaky_slope", c.leaky_slope},
                     {"gs_kernel", c.gs_kernel},
                     {"init_std", c.init_std}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  ModelConfig d;
  c.variant = parse_variant(j.value("variant", std::string(variant_name(d.variant))));
  c.f = j.value("f", d.f);
  c.k = j.value("k", d.k);
  c.reward_hidden = j.value("reward_hidden", d.reward_hidden);
  c.reward_kernel = j.value("reward_kernel", d.reward_kernel);
  c.actions = j.value("actions", d.actions);
  c.leaky_slope = j.value("leaky_slope", d.leaky_slope);
  c.gs_kernel = j.value("gs_kernel", d.gs_kernel);
  c.init_std = j.value("init_std", d.init_std);
}

ParamSet zero_params(const ModelConfig& config) {
  config.validate();
  const auto hidden = static_cast<std::size_t>(config.reward_hidden);
  const auto rk = static_cast<std::size_t>(config.reward_kernel);
  const auto a = static_cast<std::size_t>(config.actions);
  const auto f = static_cast<std::size_t>(config.f);
  const auto g = static_cast<std::size_t>(config.gs_kernel);
  ParamSet p;
  p.add(std::string(param::kRewardHidden), Tensor({hidden, 2, rk, rk}));
  p.add(std::string(param::kRewardOut), Tensor({1, hidden, 1, 1}));
  p.add(std::string(param::kViKernel), Tensor({a, 2, f, f}));
  p.add(std::string(param::kFc), Tensor({a, a, 1, 1}));
  if (config.variant == Variant::GSVIN) {
    for (std::string_view name : param::kGates) p.add(std::string(name), Tensor({1, 1, g, g}));
  } else if (config.variant == Variant::VIRN) {
    p.add(std::string(param::kAttention), Tensor({1, static_cast<std::size_t>(config.k), 1, 1}));
  }
  return p;
}

ParamSet init_params(const ModelConfig& config, std::uint64_t seed) {
  ParamSet p = zero_params(config);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, config.init_std);
  for (NamedTensor& e : p.entries()) {
    for (double& v : e.value.data()) v = normal(rng);
  }
  return p;
}

std::size_t vi_param_count(const ModelConfig& config) {
  return static_cast<std::size_t>(config.actions) * 2 * static_cast<std::size_t>(config.f * config.f);
}

std::size_t gs_param_count(const ModelConfig& config) {
  return 8 * static_cast<std::size_t>(config.gs_kernel * config.gs_kernel);
}

ModelVars vars_in_order(const ModelConfig& config, std::span<const Var> vars) {
  const std::size_t expected = zero_params(config).size();
  if (vars.size() != expected) throw UsageError("parameter count does not match the model variant");
  ModelVars m;
  m.reward_hidden = vars[0];
  m.reward_out = vars[1];
  m.vi_kernel = vars[2];
  m.fc = vars[3];
  if (config.variant == Variant::GSVIN) {
    m.gs = {vars[4], vars[5], vars[6], vars[7], vars[8], vars[9], vars[10], vars[11]};
  } else if (config.variant == Variant::VIRN) {
    m.attention = vars[4];
  }
  return m;
}

ModelVars bind_params(Tape& tape, const ModelConfig& config, const ParamSet& params, bool trainable) {
  const ParamSet layout = zero_params(config);
  std::vector<Var> vars;
  for (const NamedTensor& e : layout.entries()) {
    const Tensor& value = params.get(e.name);
    require_same_shape(value.shape(), e.value.shape(), e.name.c_str());
    vars.push_back(trainable ? tape.parameter(value) : tape.constant(value));
  }
  return vars_in_order(config, vars);
}

ViOutput vi_module(Tape& tape, Var reward, Var kernel, int k) {
  if (k < 1) throw UsageError("vi_module: need at least one iteration");
  const Shape rs = tape.value(reward).shape();
  if (rs.channels != 1) throw ShapeError("vi_module: reward must have one channel, got " + rs.str());
  const Shape ks = tape.value(kernel).shape();
  if (ks.channels != 2) throw ShapeError("vi_module: kernel must read (R, V), got " + ks.str());
  ViOutput out;
  out.reward_q = tape.conv2d_same(reward, tape.slice_channels(kernel, 0, 1));
  out.value_kernel = tape.slice_channels(kernel, 1, 1);
  // V_0 = 0 contributes nothing, so Q_1 is the reward term alone.
  out.q = out.reward_q;
  for (int i = 0; i < k; ++i) {
    if (i > 0) out.q = q_from_value(tape, out, out.value);
    out.value = tape.channel_max(out.q);
    out.values.push_back(out.value);
  }
  return out;
}

Var q_from_value(Tape& tape, const ViOutput& vi, Var value) {
  return tape.add(vi.reward_q, tape.conv2d_same(value, vi.value_kernel));
}

Var gs_module(Tape& tape, std::span<const Var> values, const GsKernels& g, double slope) {
  if (values.empty()) throw UsageError("gs_module: empty value sequence");
  const Shape s = tape.value(values.front()).shape();
  if (s.channels != 1) throw ShapeError("gs_module: value maps must have one channel, got " + s.str());
  Var c = tape.constant(Tensor(s));
  Var h = tape.constant(Tensor(s));
  for (Var v : values) {
    auto gate = [&](Var w, Var u) { return tape.add(tape.conv2d_same(v, w), tape.conv2d_same(h, u)); };
    const Var forget = tape.sigmoid(gate(g.w_f, g.u_f));
    const Var input = tape.sigmoid(gate(g.w_i, g.u_i));
    const Var candidate = tape.leaky_relu(gate(g.w_c, g.u_c), slope);
    const Var output = tape.sigmoid(gate(g.w_o, g.u_o));
    c = tape.add(tape.hadamard(forget, c), tape.hadamard(input, candidate));
    h = tape.hadamard(output, tape.leaky_relu(c, slope));
  }
  return h;
}

Var attention_summarize(Tape& tape, std::span<const Var> values, Var logits) {
  return tape.softmax_weighted_sum(values, logits);
}

Var reward_map(Tape& tape, const ModelConfig& config, const ModelVars& vars, Var input) {
  const Var hidden = tape.leaky_relu(tape.conv2d_same(input, vars.reward_hidden), config.leaky_slope);
  return tape.conv2d_same(hidden, vars.reward_out);
}

Var action_features(Tape& tape, const ModelConfig& config, const ModelVars& vars, Var input) {
  const Var reward = reward_map(tape, config, vars, input);
  ViOutput vi = vi_module(tape, reward, vars.vi_kernel, config.k);
  if (config.variant == Variant::VIN) return vi.q;
  const Var summary = config.variant == Variant::GSVIN ? gs_module(tape, vi.values, vars.gs, config.leaky_slope)
                                                       : attention_summarize(tape, vi.values, vars.attention);
  return q_from_value(tape, vi, summary);
}

Var forward(Tape& tape, const ModelConfig& config, const ModelVars& vars, Var input, std::span<const Cell> agents) {
  const Var q = action_features(tape, config, vars, input);
  return tape.conv2d_same(tape.gather_cells(q, agents), vars.fc);
}

Batch make_batch(std::span<const PlanningSample> samples, std::span<const std::size_t> indices) {
  if (indices.empty()) throw UsageError("make_batch: empty batch");
  const GridMap& first = samples[indices.front()].map;
  const auto h = static_cast<std::size_t>(first.height());
  const auto w = static_cast<std::size_t>(first.width());
  Batch batch;
  batch.input = Tensor({indices.size(), 2, h, w});
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const PlanningSample& s = samples[indices[b]];
    if (s.map.height() != first.height() || s.map.width() != first.width()) {
      throw ShapeError("make_batch: samples have different map sizes");
    }
    if (!s.map.in_bounds(s.agent)) throw ValidationError("make_batch: agent outside the map");
    double* obstacles = batch.input.ptr() + batch.input.index(b, 0, 0, 0);
    for (std::size_t i = 0; i < s.map.cells(); ++i) obstacles[i] = s.map.obstacles()[i] != 0 ? 1.0 : 0.0;
    batch.input.at(b, 1, static_cast<std::size_t>(s.map.goal().row), static_cast<std::size_t>(s.map.goal().col)) =
        kGoalValue;
    batch.agents.push_back(s.agent);
    batch.labels.push_back(s.expert_action);
  }
  return batch;
}

Batch make_batch(std::span<const PlanningSample> samples) {
  std::vector<std::size_t> all(samples.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return make_batch(samples, all);
}

int argmax_action(std::span<const double> logits) {
  return static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

std::vector<std::vector<int>> policy_grids(const ModelConfig& config, const ParamSet& params,
                                           std::span<const GridMap> maps) {
  std::vector<std::vector<int>> grids;
  grids.reserve(maps.size());
  for (const GridMap& map : maps) {
    const auto h = static_cast<std::size_t>(map.height());
    const auto w = static_cast<std::size_t>(map.width());
    Tensor input({1, 2, h, w});
    for (std::size_t i = 0; i < map.cells(); ++i) input[i] = map.obstacles()[i] != 0 ? 1.0 : 0.0;
    input.at(0, 1, static_cast<std::size_t>(map.goal().row), static_cast<std::size_t>(map.goal().col)) = kGoalValue;

    Tape tape;
    const ModelVars vars = bind_params(tape, config, params, false);
    // The head is a pointwise linear map, so applying it to every cell equals gather-then-head.
    const Var logits = tape.conv2d_same(action_features(tape, config, vars, tape.constant(std::move(input))), vars.fc);
    const Tensor& z = tape.value(logits);
    std::vector<int> grid(map.cells());
    std::vector<double> cell_logits(static_cast<std::size_t>(config.actions));
    for (std::size_t i = 0; i < map.cells(); ++i) {
      for (std::size_t a = 0; a < cell_logits.size(); ++a) cell_logits[a] = z[a * map.cells() + i];
      grid[i] = argmax_action(cell_logits);
    }
    grids.push_back(std::move(grid));
  }
  return grids;
}

}  // namespace gsvin
