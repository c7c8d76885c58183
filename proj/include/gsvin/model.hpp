#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "gsvin/dataset.hpp"
#include "gsvin/params.hpp"
#include "gsvin/tape.hpp"

namespace gsvin {

enum class Variant : std::uint8_t { VIN, VIRN, GSVIN };

std::string_view variant_name(Variant v);
/// Accepts "VIN", "VIRN", "GSVIN" or "GS-VIN" (case-insensitive).
Variant parse_variant(std::string_view name);

struct ModelConfig {
  Variant variant = Variant::GSVIN;
  int f = 7;                 // VI kernel size
  int k = 4;                 // VI iterations
  int reward_hidden = 150;   // width of the first reward conv
  int reward_kernel = 3;     // kernel of the first reward conv; the second is 1x1
  int actions = kNumActions;
  double leaky_slope = 0.01;
  int gs_kernel = 3;         // gate kernel size, independent of f
  double init_std = 0.01;

  void validate() const;
  /// Config with k taken from the adaptive iteration heuristic for an m x n map.
  static ModelConfig for_map(Variant variant, int height, int width, int f, double k_prime = 1.0);
  bool operator==(const ModelConfig&) const = default;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

namespace param {
inline constexpr std::string_view kRewardHidden = "reward.hidden";  // (hidden, 2, 3, 3)
inline constexpr std::string_view kRewardOut = "reward.out";        // (1, hidden, 1, 1)
inline constexpr std::string_view kViKernel = "vi.kernel";          // (A, 2, f, f): channel 0 reads R, channel 1 reads V
inline constexpr std::string_view kFc = "head.fc";                  // (A, A, 1, 1)
inline constexpr std::string_view kAttention = "virn.logits";       // (1, k, 1, 1)
/// Gate kernels in order W_f, W_i, W_c, W_o, U_f, U_i, U_c, U_o; each (1, 1, f_gs, f_gs).
inline constexpr std::array<std::string_view, 8> kGates = {"gs.W_f", "gs.W_i", "gs.W_c", "gs.W_o",
                                                           "gs.U_f", "gs.U_i", "gs.U_c", "gs.U_o"};
}  // namespace param

/// Every weight drawn i.i.d. from N(0, init_std^2); deterministic per seed.
ParamSet init_params(const ModelConfig& config, std::uint64_t seed);

/// Zero tensors with the shapes init_params would produce.
ParamSet zero_params(const ModelConfig& config);

/// A * 2 * f^2
std::size_t vi_param_count(const ModelConfig& config);
/// 8 * f_gs^2
std::size_t gs_param_count(const ModelConfig& config);

struct GsKernels {
  Var w_f, w_i, w_c, w_o;
  Var u_f, u_i, u_c, u_o;
};

struct ModelVars {
  Var reward_hidden, reward_out, vi_kernel, fc;
  GsKernels gs;
  Var attention;
};

/// Places every parameter on the tape (tracked iff `trainable`) in ParamSet order.
ModelVars bind_params(Tape& tape, const ModelConfig& config, const ParamSet& params, bool trainable);
/// Maps Vars that were created in `zero_params(config)` order onto roles.
ModelVars vars_in_order(const ModelConfig& config, std::span<const Var> vars);

struct ViOutput {
  Var value;                // V_k
  Var q;                    // Q_k, the action maps whose max is V_k
  std::vector<Var> values;  // V_1 .. V_k
  Var reward_q;             // W^R * R, shared by every iteration
  Var value_kernel;         // W^V, the value half of the kernel
};

/// k rounds of Q = conv(stack(R, V), W); V = max_channels(Q), starting from V_0 = 0.
/// The kernel is split as Q = W^R * R + W^V * V so the reward term is computed once.
ViOutput vi_module(Tape& tape, Var reward, Var kernel, int k);

/// Q for an arbitrary value map using the kernel halves held by `vi`.
Var q_from_value(Tape& tape, const ViOutput& vi, Var value);

/// Gated summary of V_1..V_k (bias-free convolutional LSTM with LeakyReLU); returns h_k.
Var gs_module(Tape& tape, std::span<const Var> values, const GsKernels& gates, double slope);

/// sum_k softmax(logits)_k * V_k.
Var attention_summarize(Tape& tape, std::span<const Var> values, Var logits);

/// Two-layer reward network: conv(2->hidden) + LeakyReLU, then 1x1 conv(hidden->1).
Var reward_map(Tape& tape, const ModelConfig& config, const ModelVars& vars, Var input);

/// Action maps the head reads from: Q_k for VIN, Q' = conv(stack(R, V'), W) for VIRN and GS-VIN.
Var action_features(Tape& tape, const ModelConfig& config, const ModelVars& vars, Var input);

/// Action logits (B, A, 1, 1) at each sample's agent cell.
Var forward(Tape& tape, const ModelConfig& config, const ModelVars& vars, Var input, std::span<const Cell> agents);

struct Batch {
  Tensor input;  // (B, 2, H, W): obstacle map {0,1}, goal map (10 at the goal)
  std::vector<Cell> agents;
  std::vector<int> labels;
};

inline constexpr double kGoalValue = 10.0;

/// Encodes the selected samples; all must share one map size.
Batch make_batch(std::span<const PlanningSample> samples, std::span<const std::size_t> indices);
Batch make_batch(std::span<const PlanningSample> samples);

/// Greedy action (lowest index on ties) for every cell of each map, row-major.
std::vector<std::vector<int>> policy_grids(const ModelConfig& config, const ParamSet& params,
                                           std::span<const GridMap> maps);

/// argmax with lowest-index tie-break.
int argmax_action(std::span<const double> logits);

}  // namespace gsvin
