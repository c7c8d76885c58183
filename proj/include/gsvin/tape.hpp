#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "gsvin/cell.hpp"
#include "gsvin/tensor.hpp"

namespace gsvin {

/// Handle to a tensor recorded on a Tape.
struct Var {
  static constexpr std::uint32_t kInvalid = std::numeric_limits<std::uint32_t>::max();
  std::uint32_t id = kInvalid;
  bool valid() const { return id != kInvalid; }
};

// Reverse-mode differentiation over a fixed set of primitives.
//
// Every primitive appends one node holding its forward value. A node requires a
// gradient iff any of its operands does; only those nodes get a backward closure.
// `backward` walks the nodes in reverse creation order, so each recorded
// operation is visited exactly once.
//
// Convolutions are cross-correlations with zero "same" padding and no bias:
//   out[b,o,y,x] = sum_{i,dy,dx} w[o,i,dy,dx] * in[b,i,y+dy-p,x+dx-p],  p = (f-1)/2.
//
// A Tape is not thread-safe; use one tape per thread.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  Var constant(Tensor value);
  Var parameter(Tensor value);

  const Tensor& value(Var v) const;
  /// Accumulated gradient; all zeros when no gradient reached `v`. Throws UsageError if `v` is untracked.
  const Tensor& grad(Var v) const;
  bool requires_grad(Var v) const;
  std::size_t size() const { return nodes_.size(); }

  Var conv2d_same(Var input, Var kernel);
  /// Per-cell max over channels. Ties resolve to the lowest channel index.
  Var channel_max(Var input);
  /// Winning channel per (batch, y, x) of a `channel_max` result.
  const std::vector<std::int32_t>& argindex(Var channel_max_result) const;

  Var sigmoid(Var x);
  /// x for x >= 0, slope * x otherwise; derivative at exactly 0 is 1.
  Var leaky_relu(Var x, double slope);
  Var add(Var a, Var b);
  Var hadamard(Var a, Var b);
  /// Concatenates along the channel axis.
  Var stack_channels(Var a, Var b);
  Var concat_channels(std::span<const Var> parts);
  /// Channels [begin, begin + count) of x.
  Var slice_channels(Var x, std::size_t begin, std::size_t count);
  /// (B,C,H,W) -> (B,C,1,1), reading cell `cells[b]` from sample b.
  Var gather_cells(Var input, std::span<const Cell> cells);
  /// softmax(logits) weighted sum of `parts`; logits has shape (1, parts.size(), 1, 1).
  Var softmax_weighted_sum(std::span<const Var> parts, Var logits);
  /// Sum of all elements as a (1,1,1,1) tensor.
  Var sum(Var x);
  /// Mean over the batch of -log softmax(logits[b])[label[b]]; logits are (B,A,1,1).
  Var softmax_cross_entropy(Var logits, std::span<const int> labels);
  /// Same, with labels given as a one-hot (B,A,1,1) tensor. Throws ValidationError on non-one-hot rows.
  Var softmax_cross_entropy(Var logits, const Tensor& one_hot);

  /// Seeds d(loss)/d(loss) = 1 and propagates. `loss` must be a tracked scalar.
  void backward(Var loss);
  void zero_grad();

  /// Node ids in the order the last `backward` visited them.
  const std::vector<std::uint32_t>& last_backward_order() const { return backward_order_; }

  /// Discrete decisions taken during the forward pass (argmax winners, leaky_relu branches).
  /// Two runs with equal signatures lie in the same differentiable piece.
  const std::vector<std::int32_t>& branch_signature() const { return branches_; }
  void set_record_branches(bool on) { record_branches_ = on; }

 private:
  using BackwardFn = std::function<void(Tape&, std::uint32_t)>;

  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    BackwardFn backward;
    std::vector<std::int32_t> aux;
  };

  Var push(Tensor value, bool requires_grad, BackwardFn fn = {}, std::vector<std::int32_t> aux = {});
  const Node& node(Var v) const;
  Tensor& grad_buffer(std::uint32_t id);
  bool tracked(std::uint32_t id) const { return nodes_[id].requires_grad; }

  std::vector<Node> nodes_;
  std::vector<std::int32_t> branches_;
  std::vector<std::uint32_t> backward_order_;
  bool record_branches_ = false;
};

}  // namespace gsvin
