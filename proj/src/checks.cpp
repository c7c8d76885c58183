#include "gsvin/checks.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>

#include "gsvin/errors.hpp"
#include "gsvin/evaluation.hpp"
#include "gsvin/gradcheck.hpp"
#include "gsvin/grid.hpp"
#include "gsvin/heuristic.hpp"
#include "gsvin/random.hpp"
#include "gsvin/training.hpp"

namespace gsvin {
namespace {

// Parameter scale for finite differences. At the 0.01 training init the loss is nearly flat and
// central differences drown in rounding noise, so the check runs on larger weights.
constexpr double kGradCheckStd = 0.2;

class Timer {
 public:
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count(); }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string printf_string(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

CheckResult finish(std::string name, bool passed, std::string detail, const Timer& timer) {
  return {std::move(name), passed, std::move(detail), timer.seconds()};
}

}  // namespace

Tensor crafted_vi_kernel(int f, double gamma) {
  if (f < 3 || f % 2 == 0) throw ValidationError("crafted kernel needs an odd f >= 3");
  const auto fs = static_cast<std::size_t>(f);
  const std::size_t p = fs / 2;
  Tensor w({static_cast<std::size_t>(kNumActions), 2, fs, fs});
  for (int a = 0; a < kNumActions; ++a) {
    const auto ai = static_cast<std::size_t>(a);
    w.at(ai, 0, p, p) = 1.0;
    const Offset o = kActionOffsets[ai];
    w.at(ai, 1, static_cast<std::size_t>(static_cast<long>(p) + o.drow), static_cast<std::size_t>(static_cast<long>(p) + o.dcol)) =
        gamma;
  }
  return w;
}

Tensor positive_vi_kernel(int f, double weight) {
  const auto fs = static_cast<std::size_t>(f);
  Tensor w({static_cast<std::size_t>(kNumActions), 2, fs, fs});
  w.fill(weight);
  return w;
}

std::vector<double> vi_values(const Tensor& reward, const Tensor& kernel, int k) {
  Tape tape;
  const ViOutput out = vi_module(tape, tape.constant(reward), tape.constant(kernel), k);
  const Tensor& v = tape.value(out.value);
  const std::size_t cells = v.shape().plane();
  return {v.ptr(), v.ptr() + cells};
}

CheckResult check_heuristic_table4() {
  const Timer timer;
  int mismatches = 0;
  std::string detail;
  for (std::size_t r = 0; r < kTable4KPrimes.size(); ++r) {
    for (std::size_t c = 0; c < kTable4Kernels.size(); ++c) {
      const int k = scaled_k(32, 32, kTable4Kernels[c], kTable4KPrimes[r]);
      if (k != kTable4[r][c]) {
        ++mismatches;
        detail += printf_string("(k'=%g,f=%d): %d vs %d; ", kTable4KPrimes[r], kTable4Kernels[c], k, kTable4[r][c]);
      }
    }
  }
  const int triples[3][2] = {{16, 5}, {32, 10}, {64, 19}};
  for (const auto& t : triples) {
    const int k = heuristic_k(t[0], t[0], 11);
    if (k != t[1]) {
      ++mismatches;
      detail += printf_string("(%dx%d,f=11): %d vs %d; ", t[0], t[0], k, t[1]);
    }
  }
  return finish("heuristic_table4", mismatches == 0, printf_string("%d mismatches of 45 ", mismatches) + detail, timer);
}

CheckResult check_vi_equivalence(int maps, int max_size, std::uint64_t seed) {
  const Timer timer;
  double worst = 0.0;
  for (int i = 0; i < maps; ++i) {
    Rng rng = derive_rng(seed, {0x5649, static_cast<std::uint64_t>(i)});
    const int h = 4 + static_cast<int>(uniform_below(rng, static_cast<std::uint64_t>(max_size - 3)));
    const int w = 4 + static_cast<int>(uniform_below(rng, static_cast<std::uint64_t>(max_size - 3)));
    const GridMap map = generate_map(h, w, {0.1, 0.3}, rng);
    const int f = 3 + 2 * static_cast<int>(uniform_below(rng, 3));
    const int k = 1 + static_cast<int>(uniform_below(rng, 20));
    const double gamma = 0.5 + 0.5 * uniform_unit(rng);

    // Obstacles enter through the reward only; the convolution cannot block moves.
    Tensor reward({1, 1, static_cast<std::size_t>(h), static_cast<std::size_t>(w)});
    for (std::size_t c = 0; c < map.cells(); ++c) {
      reward[c] = (map.obstacles()[c] != 0 ? -1.0 : 0.0) + 0.2 * (uniform_unit(rng) - 0.5);
    }
    reward[map.index(map.goal())] = 1.0;

    ValueIterationOptions opt;
    opt.gamma = gamma;
    opt.max_iters = k;
    opt.tol = -1.0;
    opt.reward = RewardTiming::OnDeparture;
    opt.boundary = BoundaryRule::Exit;
    opt.obstacles_block = false;
    opt.goal_absorbing = false;
    const ValueIterationResult oracle = tabular_vi(map, reward.data(), opt);
    const std::vector<double> conv = vi_values(reward, crafted_vi_kernel(f, gamma), k);
    for (std::size_t c = 0; c < conv.size(); ++c) worst = std::max(worst, std::abs(conv[c] - oracle.values[c]));
  }
  return finish("vi_equivalence", worst < 1e-9, printf_string("%d maps, max |dV| = %.3g", maps, worst), timer);
}

CheckResult check_propagation_radius(std::span<const int> f_values, std::span<const int> k_values, int size) {
  const Timer timer;
  const auto s = static_cast<std::size_t>(size);
  const Cell sources[] = {{size / 2, size / 2}, {0, 0}, {3, size - 2}};
  int cases = 0;
  int failures = 0;
  std::string detail;
  for (int f : f_values) {
    for (int k : k_values) {
      for (Cell src : sources) {
        Tensor reward({1, 1, s, s});
        reward.at(0, 0, static_cast<std::size_t>(src.row), static_cast<std::size_t>(src.col)) = 1.0;
        const std::vector<double> v = vi_values(reward, positive_vi_kernel(f, 0.5), k);
        const int radius = k * (f - 1) / 2;
        bool ok = true;
        for (int r = 0; r < size; ++r) {
          for (int c = 0; c < size; ++c) {
            const bool inside = chebyshev({r, c}, src) <= radius;
            if ((v[static_cast<std::size_t>(r * size + c)] > 0.0) != inside) ok = false;
          }
        }
        ++cases;
        if (!ok) {
          ++failures;
          detail += printf_string(" (f=%d,k=%d,src=%d,%d)", f, k, src.row, src.col);
        }
      }
    }
  }
  return finish("propagation_radius", failures == 0, printf_string("%d/%d cases match", cases - failures, cases) + detail,
                timer);
}

CheckResult check_gradients(Variant variant, std::size_t samples, std::uint64_t seed) {
  const Timer timer;
  ModelConfig cfg = ModelConfig::for_map(variant, 8, 8, 7);
  cfg.init_std = kGradCheckStd;
  const ParamSet params = init_params(cfg, seed);
  DatasetManifest m;
  m.height = 8;
  m.width = 8;
  m.maps = 2;
  m.seed = seed;
  const Dataset data = generate_dataset(m);
  const std::vector<std::size_t> pick{0, 1, 2};
  const Batch batch = make_batch(data.train, pick);
  const LossBuilder build = [&](Tape& tape, std::span<const Var> vars) {
    const Var logits = forward(tape, cfg, vars_in_order(cfg, vars), tape.constant(batch.input), batch.agents);
    return tape.softmax_cross_entropy(logits, batch.labels);
  };
  GradCheckOptions opt;
  opt.samples = samples;
  opt.seed = seed;
  const GradCheckReport r = finite_diff_check(params, build, opt);
  return finish("gradients_" + std::string(variant_name(variant)), r.passed && r.checked >= samples,
                printf_string("checked %zu, skipped %zu, failures %zu, max rel err %.3g", r.checked, r.skipped,
                              r.failures, r.max_rel_error),
                timer);
}

CheckResult check_astar_dijkstra(std::span<const int> sizes, int maps, std::uint64_t seed) {
  const Timer timer;
  int instances = 0;
  int mismatches = 0;
  for (int size : sizes) {
    for (int i = 0; i < maps; ++i) {
      Rng rng = derive_rng(seed, {0x4153, static_cast<std::uint64_t>(size), static_cast<std::uint64_t>(i)});
      const GridMap map = generate_map(size, size, {0.1, 0.3}, rng);
      Cell start;
      do {
        start = map.cell(uniform_below(rng, map.cells()));
      } while (!map.free(start) || start == map.goal());
      const std::optional<PathResult> path = astar_shortest(map, start);
      const int dist = dijkstra_distances(map, start)[map.index(map.goal())];
      ++instances;
      bool ok = path ? path->length == dist : dist < 0;
      if (path) {
        ok = ok && path->path.front() == start && path->path.back() == map.goal() &&
             path->length + 1 == static_cast<int>(path->path.size());
        for (std::size_t j = 1; ok && j < path->path.size(); ++j) {
          ok = map.free(path->path[j]) && chebyshev(path->path[j - 1], path->path[j]) == 1;
        }
      }
      if (!ok) ++mismatches;
    }
  }
  return finish("astar_vs_dijkstra", mismatches == 0, printf_string("%d instances, %d mismatches", instances, mismatches),
                timer);
}

CheckResult check_oracle_replay(std::span<const PlanningSample> samples, const std::string& label) {
  const Timer timer;
  const EvalReport r = evaluate_policy(oracle_policy(), samples);
  const bool ok = r.success_rate == 1.0 && r.traj_diff && *r.traj_diff == 0.0;
  return finish("oracle_replay_" + label, ok,
                printf_string("%zu episodes, success_rate %.6f, traj_diff %.6g", r.episodes, r.success_rate,
                              r.traj_diff.value_or(std::nan(""))),
                timer);
}

CheckResult check_determinism(std::uint64_t seed) {
  const Timer timer;
  DatasetManifest m;
  m.height = 8;
  m.width = 8;
  m.maps = 40;
  m.seed = seed;
  const Dataset a = generate_dataset(m, 1);
  const Dataset b = generate_dataset(m, 3);
  const bool data_same = encode_dataset(m, "train", a.train) == encode_dataset(m, "train", b.train) &&
                         encode_dataset(m, "test", a.test) == encode_dataset(m, "test", b.test);

  const ModelConfig mc = ModelConfig::for_map(Variant::GSVIN, 8, 8, 7);
  TrainConfig tc;
  tc.epochs = 2;
  tc.batch_size = 32;
  tc.seed = seed;
  const TrainState s1 = train(mc, a, tc);
  const TrainState s2 = train(mc, b, tc);
  const bool train_same = s1.record.loss_trajectory() == s2.record.loss_trajectory() && s1.params == s2.params &&
                          s1.slots == s2.slots;
  const bool eval_same = evaluate(mc, s1.params, a.test) == evaluate(mc, s2.params, b.test);
  return finish("determinism", data_same && train_same && eval_same,
                printf_string("dataset %s, training %s, eval %s", data_same ? "identical" : "DIFFERENT",
                              train_same ? "identical" : "DIFFERENT", eval_same ? "identical" : "DIFFERENT"),
                timer);
}

}  // namespace gsvin
