#include "gsvin/tape.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gsvin/conv.hpp"
#include "gsvin/errors.hpp"

namespace gsvin {
namespace {

double sigmoid_scalar(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void check_elementwise(const Tensor& a, const Tensor& b, const char* what) { require_same_shape(a.shape(), b.shape(), what); }

}  // namespace

Var Tape::push(Tensor value, bool requires_grad, BackwardFn fn, std::vector<std::int32_t> aux) {
  Node n;
  if (requires_grad) n.grad = Tensor(value.shape());
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  if (requires_grad) n.backward = std::move(fn);
  n.aux = std::move(aux);
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

const Tape::Node& Tape::node(Var v) const {
  if (!v.valid() || v.id >= nodes_.size()) throw UsageError("tape: invalid variable handle");
  return nodes_[v.id];
}

Tensor& Tape::grad_buffer(std::uint32_t id) { return nodes_[id].grad; }

Var Tape::constant(Tensor value) { return push(std::move(value), false); }

Var Tape::parameter(Tensor value) { return push(std::move(value), true); }

const Tensor& Tape::value(Var v) const { return node(v).value; }

const Tensor& Tape::grad(Var v) const {
  const Node& n = node(v);
  if (!n.requires_grad) throw UsageError("tape: gradient requested for an untracked tensor");
  return n.grad;
}

bool Tape::requires_grad(Var v) const { return node(v).requires_grad; }

const std::vector<std::int32_t>& Tape::argindex(Var v) const {
  const Node& n = node(v);
  if (n.aux.size() != n.value.size()) throw UsageError("tape: argindex requested for a non channel_max result");
  return n.aux;
}

Var Tape::conv2d_same(Var input, Var kernel) {
  Tensor out = gsvin::conv2d_same(value(input), value(kernel));
  const bool track = tracked(input.id) || tracked(kernel.id);
  return push(std::move(out), track, [input, kernel](Tape& t, std::uint32_t self) {
    Tensor* gi = t.tracked(input.id) ? &t.grad_buffer(input.id) : nullptr;
    Tensor* gk = t.tracked(kernel.id) ? &t.grad_buffer(kernel.id) : nullptr;
    conv2d_same_backward(t.nodes_[input.id].value, t.nodes_[kernel.id].value, t.nodes_[self].grad, gi, gk);
  });
}

Var Tape::channel_max(Var input) {
  const Tensor& x = value(input);
  const Shape s = x.shape();
  if (s.channels == 0) throw ShapeError("channel_max: input " + s.str() + " has no channels");
  Tensor out({s.batch, 1, s.height, s.width});
  std::vector<std::int32_t> arg(out.size(), 0);
  const std::size_t cells = s.plane();
  for (std::size_t b = 0; b < s.batch; ++b) {
    const double* base = x.ptr() + b * s.channels * cells;
    double* best = out.ptr() + b * cells;
    std::int32_t* win = arg.data() + b * cells;
    std::copy(base, base + cells, best);
    for (std::size_t c = 1; c < s.channels; ++c) {
      const double* plane = base + c * cells;
      for (std::size_t i = 0; i < cells; ++i) {
        // strict comparison keeps the lowest index on ties
        if (plane[i] > best[i]) {
          best[i] = plane[i];
          win[i] = static_cast<std::int32_t>(c);
        }
      }
    }
  }
  if (record_branches_) branches_.insert(branches_.end(), arg.begin(), arg.end());
  return push(std::move(out), tracked(input.id),
              [input](Tape& t, std::uint32_t self) {
                const Node& n = t.nodes_[self];
                const Shape s = t.nodes_[input.id].value.shape();
                const std::size_t cells = s.plane();
                Tensor& gi = t.grad_buffer(input.id);
                for (std::size_t b = 0; b < s.batch; ++b) {
                  for (std::size_t i = 0; i < cells; ++i) {
                    const std::size_t k = b * cells + i;
                    gi[(b * s.channels + static_cast<std::size_t>(n.aux[k])) * cells + i] += n.grad[k];
                  }
                }
              },
              std::move(arg));
}

Var Tape::sigmoid(Var x) {
  Tensor out = value(x);
  for (double& v : out.data()) v = sigmoid_scalar(v);
  return push(std::move(out), tracked(x.id), [x](Tape& t, std::uint32_t self) {
    const Node& n = t.nodes_[self];
    Tensor& gx = t.grad_buffer(x.id);
    for (std::size_t i = 0; i < n.value.size(); ++i) {
      const double s = n.value[i];
      gx[i] += n.grad[i] * s * (1.0 - s);
    }
  });
}

Var Tape::leaky_relu(Var x, double slope) {
  const Tensor& in = value(x);
  Tensor out(in.shape());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] >= 0.0 ? in[i] : slope * in[i];
  if (record_branches_) {
    for (double v : in.data()) branches_.push_back(v >= 0.0 ? 1 : 0);
  }
  return push(std::move(out), tracked(x.id), [x, slope](Tape& t, std::uint32_t self) {
    const Tensor& in = t.nodes_[x.id].value;
    const Tensor& g = t.nodes_[self].grad;
    Tensor& gx = t.grad_buffer(x.id);
    for (std::size_t i = 0; i < in.size(); ++i) gx[i] += in[i] >= 0.0 ? g[i] : slope * g[i];
  });
}

Var Tape::add(Var a, Var b) {
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  check_elementwise(va, vb, "add");
  Tensor out = va;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += vb[i];
  const bool track = tracked(a.id) || tracked(b.id);
  return push(std::move(out), track, [a, b](Tape& t, std::uint32_t self) {
    const Tensor& g = t.nodes_[self].grad;
    for (Var v : {a, b}) {
      if (!t.tracked(v.id)) continue;
      Tensor& gv = t.grad_buffer(v.id);
      for (std::size_t i = 0; i < g.size(); ++i) gv[i] += g[i];
    }
  });
}

Var Tape::hadamard(Var a, Var b) {
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  check_elementwise(va, vb, "hadamard");
  Tensor out = va;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= vb[i];
  const bool track = tracked(a.id) || tracked(b.id);
  return push(std::move(out), track, [a, b](Tape& t, std::uint32_t self) {
    const Tensor& g = t.nodes_[self].grad;
    if (t.tracked(a.id)) {
      const Tensor& other = t.nodes_[b.id].value;
      Tensor& ga = t.grad_buffer(a.id);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * other[i];
    }
    if (t.tracked(b.id)) {
      const Tensor& other = t.nodes_[a.id].value;
      Tensor& gb = t.grad_buffer(b.id);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * other[i];
    }
  });
}

Var Tape::stack_channels(Var a, Var b) {
  const Var parts[] = {a, b};
  return concat_channels(parts);
}

Var Tape::concat_channels(std::span<const Var> parts) {
  if (parts.empty()) throw UsageError("concat_channels: no inputs");
  const Shape first = value(parts.front()).shape();
  std::size_t channels = 0;
  bool track = false;
  for (Var p : parts) {
    const Shape s = value(p).shape();
    if (s.batch != first.batch || s.height != first.height || s.width != first.width) {
      throw ShapeError("stack_channels: shape mismatch " + first.str() + " vs " + s.str());
    }
    channels += s.channels;
    track = track || tracked(p.id);
  }
  Tensor out({first.batch, channels, first.height, first.width});
  const std::size_t cells = first.plane();
  for (std::size_t b = 0; b < first.batch; ++b) {
    double* dst = out.ptr() + b * channels * cells;
    for (Var p : parts) {
      const Tensor& v = value(p);
      const std::size_t n = v.shape().channels * cells;
      std::copy_n(v.ptr() + b * n, n, dst);
      dst += n;
    }
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return push(std::move(out), track, [inputs = std::move(inputs)](Tape& t, std::uint32_t self) {
    const Tensor& g = t.nodes_[self].grad;
    const Shape s = g.shape();
    const std::size_t cells = s.plane();
    std::size_t offset = 0;
    for (Var p : inputs) {
      const std::size_t n = t.nodes_[p.id].value.shape().channels * cells;
      if (t.tracked(p.id)) {
        Tensor& gp = t.grad_buffer(p.id);
        for (std::size_t b = 0; b < s.batch; ++b) {
          const double* src = g.ptr() + b * s.channels * cells + offset;
          double* dst = gp.ptr() + b * n;
          for (std::size_t i = 0; i < n; ++i) dst[i] += src[i];
        }
      }
      offset += n;
    }
  });
}

Var Tape::slice_channels(Var x, std::size_t begin, std::size_t count) {
  const Tensor& in = value(x);
  const Shape s = in.shape();
  if (count == 0 || begin + count > s.channels) {
    throw ShapeError("slice_channels: [" + std::to_string(begin) + "," + std::to_string(begin + count) +
                     ") outside " + s.str());
  }
  Tensor out({s.batch, count, s.height, s.width});
  const std::size_t cells = s.plane();
  for (std::size_t b = 0; b < s.batch; ++b) {
    std::copy_n(in.ptr() + (b * s.channels + begin) * cells, count * cells, out.ptr() + b * count * cells);
  }
  return push(std::move(out), tracked(x.id), [x, begin, count](Tape& t, std::uint32_t self) {
    const Tensor& g = t.nodes_[self].grad;
    Tensor& gx = t.grad_buffer(x.id);
    const Shape s = gx.shape();
    const std::size_t cells = s.plane();
    for (std::size_t b = 0; b < s.batch; ++b) {
      const double* src = g.ptr() + b * count * cells;
      double* dst = gx.ptr() + (b * s.channels + begin) * cells;
      for (std::size_t i = 0; i < count * cells; ++i) dst[i] += src[i];
    }
  });
}

Var Tape::gather_cells(Var input, std::span<const Cell> cells) {
  const Tensor& x = value(input);
  const Shape s = x.shape();
  if (cells.size() != s.batch) {
    throw ShapeError("gather_cells: " + std::to_string(cells.size()) + " cells for input " + s.str());
  }
  for (const Cell& c : cells) {
    if (c.row < 0 || c.col < 0 || static_cast<std::size_t>(c.row) >= s.height ||
        static_cast<std::size_t>(c.col) >= s.width) {
      throw ValidationError("gather_cells: cell (" + std::to_string(c.row) + "," + std::to_string(c.col) +
                            ") outside map " + std::to_string(s.height) + "x" + std::to_string(s.width));
    }
  }
  Tensor out({s.batch, s.channels, 1, 1});
  for (std::size_t b = 0; b < s.batch; ++b) {
    for (std::size_t c = 0; c < s.channels; ++c) {
      out.at(b, c, 0, 0) = x.at(b, c, static_cast<std::size_t>(cells[b].row), static_cast<std::size_t>(cells[b].col));
    }
  }
  std::vector<Cell> where(cells.begin(), cells.end());
  return push(std::move(out), tracked(input.id), [input, where = std::move(where)](Tape& t, std::uint32_t self) {
    const Tensor& g = t.nodes_[self].grad;
    Tensor& gi = t.grad_buffer(input.id);
    for (std::size_t b = 0; b < where.size(); ++b) {
      for (std::size_t c = 0; c < g.shape().channels; ++c) {
        gi.at(b, c, static_cast<std::size_t>(where[b].row), static_cast<std::size_t>(where[b].col)) += g.at(b, c, 0, 0);
      }
    }
  });
}

Var Tape::softmax_weighted_sum(std::span<const Var> parts, Var logits) {
  const Tensor& w = value(logits);
  if (parts.empty()) throw UsageError("softmax_weighted_sum: empty sequence");
  if (w.shape() != Shape{1, parts.size(), 1, 1}) {
    throw ShapeError("softmax_weighted_sum: " + std::to_string(parts.size()) + " maps but logits " + w.shape().str());
  }
  const Shape s = value(parts.front()).shape();
  bool track = tracked(logits.id);
  for (Var p : parts) {
    require_same_shape(value(p).shape(), s, "softmax_weighted_sum");
    track = track || tracked(p.id);
  }
  const double top = *std::max_element(w.data().begin(), w.data().end());
  std::vector<double> weights(parts.size());
  double total = 0.0;
  for (std::size_t k = 0; k < parts.size(); ++k) total += weights[k] = std::exp(w[k] - top);
  for (double& v : weights) v /= total;

  Tensor out(s);
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& v = value(parts[k]);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += weights[k] * v[i];
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return push(std::move(out), track,
              [inputs = std::move(inputs), logits, weights = std::move(weights)](Tape& t, std::uint32_t self) {
                const Tensor& g = t.nodes_[self].grad;
                std::vector<double> dweight(inputs.size(), 0.0);
                for (std::size_t k = 0; k < inputs.size(); ++k) {
                  const Tensor& v = t.nodes_[inputs[k].id].value;
                  double acc = 0.0;
                  for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * v[i];
                  dweight[k] = acc;
                  if (t.tracked(inputs[k].id)) {
                    Tensor& gv = t.grad_buffer(inputs[k].id);
                    for (std::size_t i = 0; i < g.size(); ++i) gv[i] += weights[k] * g[i];
                  }
                }
                if (t.tracked(logits.id)) {
                  double mean = 0.0;
                  for (std::size_t k = 0; k < inputs.size(); ++k) mean += weights[k] * dweight[k];
                  Tensor& gl = t.grad_buffer(logits.id);
                  for (std::size_t k = 0; k < inputs.size(); ++k) gl[k] += weights[k] * (dweight[k] - mean);
                }
              });
}

Var Tape::sum(Var x) {
  Tensor out = Tensor::scalar(value(x).sum());
  return push(std::move(out), tracked(x.id), [x](Tape& t, std::uint32_t self) {
    const double g = t.nodes_[self].grad[0];
    for (double& v : t.grad_buffer(x.id).data()) v += g;
  });
}

Var Tape::softmax_cross_entropy(Var logits, std::span<const int> labels) {
  const Tensor& z = value(logits);
  const Shape s = z.shape();
  if (s.height != 1 || s.width != 1) throw ShapeError("softmax_cross_entropy: logits must be (B,A,1,1), got " + s.str());
  if (labels.size() != s.batch) {
    throw ShapeError("softmax_cross_entropy: " + std::to_string(labels.size()) + " labels for logits " + s.str());
  }
  if (s.batch == 0) throw ShapeError("softmax_cross_entropy: empty batch");
  const std::size_t actions = s.channels;
  for (int l : labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= actions) {
      throw ValidationError("softmax_cross_entropy: label " + std::to_string(l) + " outside [0," +
                            std::to_string(actions) + ")");
    }
  }
  // probs holds softmax rows for the backward pass
  std::vector<double> probs(s.size());
  double loss = 0.0;
  for (std::size_t b = 0; b < s.batch; ++b) {
    const double* row = z.ptr() + b * actions;
    double* p = probs.data() + b * actions;
    const double top = *std::max_element(row, row + actions);
    double total = 0.0;
    for (std::size_t a = 0; a < actions; ++a) total += p[a] = std::exp(row[a] - top);
    for (std::size_t a = 0; a < actions; ++a) p[a] /= total;
    loss += std::log(total) + top - row[labels[b]];
  }
  loss /= static_cast<double>(s.batch);
  std::vector<int> targets(labels.begin(), labels.end());
  return push(Tensor::scalar(loss), tracked(logits.id),
              [logits, targets = std::move(targets), probs = std::move(probs), actions](Tape& t, std::uint32_t self) {
                const double g = t.nodes_[self].grad[0] / static_cast<double>(targets.size());
                Tensor& gz = t.grad_buffer(logits.id);
                for (std::size_t b = 0; b < targets.size(); ++b) {
                  for (std::size_t a = 0; a < actions; ++a) {
                    const double indicator = static_cast<int>(a) == targets[b] ? 1.0 : 0.0;
                    gz[b * actions + a] += g * (probs[b * actions + a] - indicator);
                  }
                }
              });
}

Var Tape::softmax_cross_entropy(Var logits, const Tensor& one_hot) {
  require_same_shape(one_hot.shape(), value(logits).shape(), "softmax_cross_entropy labels");
  const std::size_t actions = one_hot.shape().channels;
  std::vector<int> labels(one_hot.shape().batch, -1);
  for (std::size_t b = 0; b < labels.size(); ++b) {
    int ones = 0;
    for (std::size_t a = 0; a < actions; ++a) {
      const double v = one_hot[b * actions + a];
      if (v == 1.0) {
        ++ones;
        labels[b] = static_cast<int>(a);
      } else if (v != 0.0) {
        ones = -1;
        break;
      }
    }
    if (ones != 1) throw ValidationError("softmax_cross_entropy: row " + std::to_string(b) + " is not one-hot");
  }
  return softmax_cross_entropy(logits, labels);
}

void Tape::backward(Var loss) {
  const Node& n = node(loss);
  if (!n.requires_grad) throw UsageError("backward: loss does not depend on any tracked tensor");
  if (n.value.size() != 1) throw UsageError("backward: loss must be a scalar, got " + n.value.shape().str());
  backward_order_.clear();
  nodes_[loss.id].grad[0] += 1.0;
  for (std::uint32_t id = loss.id + 1; id-- > 0;) {
    Node& cur = nodes_[id];
    if (!cur.requires_grad || !cur.backward) continue;
    backward_order_.push_back(id);
    cur.backward(*this, id);
  }
}

void Tape::zero_grad() {
  for (Node& n : nodes_) {
    if (n.requires_grad) n.grad.fill(0.0);
  }
}

}  // namespace gsvin
