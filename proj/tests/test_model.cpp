#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "gsvin/checks.hpp"
#include "gsvin/errors.hpp"
#include "gsvin/heuristic.hpp"
#include "gsvin/model.hpp"

using namespace gsvin;

namespace {

Tensor random_tensor(Shape s, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Tensor t(s);
  for (double& v : t.data()) v = n(rng);
  return t;
}

using Grid = std::vector<std::vector<double>>;

Grid to_grid(const Tensor& t) {
  Grid g(t.shape().height, std::vector<double>(t.shape().width));
  for (std::size_t y = 0; y < t.shape().height; ++y)
    for (std::size_t x = 0; x < t.shape().width; ++x) g[y][x] = t.at(0, 0, y, x);
  return g;
}

// Single-channel zero-padded cross-correlation on nested vectors.
Grid conv(const Grid& in, const Tensor& k) {
  const int h = static_cast<int>(in.size()), w = static_cast<int>(in[0].size());
  const int f = static_cast<int>(k.shape().height), p = f / 2;
  Grid out(in.size(), std::vector<double>(in[0].size(), 0.0));
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int dy = 0; dy < f; ++dy)
        for (int dx = 0; dx < f; ++dx) {
          const int yy = y + dy - p, xx = x + dx - p;
          if (yy >= 0 && xx >= 0 && yy < h && xx < w)
            out[y][x] += k.at(0, 0, static_cast<std::size_t>(dy), static_cast<std::size_t>(dx)) * in[yy][xx];
        }
  return out;
}

double sig(double v) { return 1.0 / (1.0 + std::exp(-v)); }
double lrelu(double v) { return v >= 0 ? v : 0.01 * v; }

struct GsFixture {
  Tape tape;
  GsKernels gates;
  std::vector<Tensor> kernels;

  GsFixture(std::mt19937_64& rng, bool zero, bool zero_u, std::size_t f = 3) {
    Var* slots[] = {&gates.w_f, &gates.w_i, &gates.w_c, &gates.w_o, &gates.u_f, &gates.u_i, &gates.u_c, &gates.u_o};
    for (int i = 0; i < 8; ++i) {
      Tensor k = zero || (zero_u && i >= 4) ? Tensor({1, 1, f, f}) : random_tensor({1, 1, f, f}, rng, 0.5);
      kernels.push_back(k);
      *slots[i] = tape.constant(k);
    }
  }
};

Dataset small_dataset(int size, int maps, std::uint64_t seed) {
  DatasetManifest m;
  m.height = size;
  m.width = size;
  m.maps = maps;
  m.seed = seed;
  return generate_dataset(m);
}

Tensor forward_logits(const ModelConfig& cfg, const ParamSet& params, const Batch& batch) {
  Tape t;
  const ModelVars vars = bind_params(t, cfg, params, false);
  return t.value(forward(t, cfg, vars, t.constant(batch.input), batch.agents));
}

}  // namespace

TEST(Heuristic, PublishedIterationCounts) {
  EXPECT_EQ(heuristic_k(32, 32, 3), 46);
  EXPECT_EQ(heuristic_k(32, 32, 11), 10);
  EXPECT_EQ(heuristic_k(32, 32, 15), 7);
  EXPECT_EQ(heuristic_k(16, 16, 11), 5);
  EXPECT_EQ(heuristic_k(64, 64, 11), 19);
  EXPECT_EQ(scaled_k(32, 32, 3, 0.5), 23);
  EXPECT_EQ(scaled_k(32, 32, 7, 2.0), 31);
  EXPECT_EQ(scaled_k(32, 32, 5, 0.75), 17);
  for (std::size_t r = 0; r < kTable4KPrimes.size(); ++r)
    for (std::size_t c = 0; c < kTable4Kernels.size(); ++c)
      EXPECT_EQ(scaled_k(32, 32, kTable4Kernels[c], kTable4KPrimes[r]), kTable4[r][c]);
}

TEST(Heuristic, DirectFormula) {
  for (int m = 1; m <= 40; m += 3)
    for (int f = 3; f <= 15; f += 2) {
      const double want = std::ceil(std::hypot(m, m + 1) / ((f - 1) / 2.0));
      EXPECT_EQ(heuristic_k(m, m + 1, f), static_cast<int>(want));
    }
  EXPECT_EQ(scaled_k(4, 4, 15, 0.01), 1);
}

TEST(Heuristic, RejectsDegenerateKernels) {
  EXPECT_THROW(heuristic_k(32, 32, 1), ValidationError);
  EXPECT_THROW(heuristic_k(32, 32, 4), ValidationError);
  EXPECT_THROW(heuristic_k(0, 32, 3), ValidationError);
  EXPECT_THROW(scaled_k(32, 32, 3, 0.0), ValidationError);
}

TEST(ViModule, ZeroParamsGiveZeroValue) {
  std::mt19937_64 rng(1);
  Tape t;
  const ViOutput out = vi_module(t, t.constant(random_tensor({2, 1, 6, 6}, rng)), t.constant(Tensor({8, 2, 5, 5})), 1);
  for (double v : t.value(out.value).data()) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(out.values.size(), 1u);
}

TEST(ViModule, MatchesStackedConvolutionLoop) {
  std::mt19937_64 rng(2);
  const Tensor reward = random_tensor({2, 1, 7, 6}, rng);
  const Tensor kernel = random_tensor({8, 2, 3, 3}, rng, 0.3);
  Tape t;
  const ViOutput out = vi_module(t, t.constant(reward), t.constant(kernel), 5);
  ASSERT_EQ(out.values.size(), 5u);
  Tensor v({2, 1, 7, 6});
  for (int k = 0; k < 5; ++k) {
    Tape ref;
    const Var q = ref.conv2d_same(ref.stack_channels(ref.constant(reward), ref.constant(v)), ref.constant(kernel));
    v = ref.value(ref.channel_max(q));
    const Tensor& got = t.value(out.values[static_cast<std::size_t>(k)]);
    for (std::size_t i = 0; i < v.size(); ++i) ASSERT_NEAR(got[i], v[i], 1e-12);
    if (k == 4) {
      for (std::size_t i = 0; i < v.size(); ++i) EXPECT_NEAR(t.value(out.q)[i], ref.value(q)[i], 1e-12);
    }
  }
}

TEST(ViModule, CraftedKernelMatchesTabularVi) {
  const CheckResult r = check_vi_equivalence(20, 12, 3);
  EXPECT_TRUE(r.passed) << r.detail;
}

TEST(ViModule, PropagationRadius) {
  const int fs[] = {3, 5};
  const int ks[] = {1, 2, 3};
  const CheckResult r = check_propagation_radius(fs, ks, 20);
  EXPECT_TRUE(r.passed) << r.detail;
}

TEST(GsModule, ZeroParamsGiveZero) {
  std::mt19937_64 rng(3);
  GsFixture fx(rng, true, true);
  std::vector<Var> seq;
  for (int i = 0; i < 4; ++i) seq.push_back(fx.tape.constant(random_tensor({1, 1, 5, 5}, rng)));
  const Var h = gs_module(fx.tape, seq, fx.gates, 0.01);
  for (double v : fx.tape.value(h).data()) EXPECT_EQ(v, 0.0);
}

TEST(GsModule, EmptySequenceIsUsageError) {
  std::mt19937_64 rng(3);
  GsFixture fx(rng, true, true);
  EXPECT_THROW(gs_module(fx.tape, std::vector<Var>{}, fx.gates, 0.01), UsageError);
}

TEST(GsModule, SingleStepClosedForm) {
  std::mt19937_64 rng(4);
  GsFixture fx(rng, false, true);
  const Tensor v1 = random_tensor({1, 1, 5, 5}, rng);
  const std::vector<Var> seq{fx.tape.constant(v1)};
  const Tensor& h = fx.tape.value(gs_module(fx.tape, seq, fx.gates, 0.01));
  const Grid g = to_grid(v1);
  const Grid wi = conv(g, fx.kernels[1]), wc = conv(g, fx.kernels[2]), wo = conv(g, fx.kernels[3]);
  for (std::size_t y = 0; y < 5; ++y)
    for (std::size_t x = 0; x < 5; ++x) {
      const double want = sig(wo[y][x]) * lrelu(sig(wi[y][x]) * lrelu(wc[y][x]));
      EXPECT_NEAR(h.at(0, 0, y, x), want, 1e-14);
    }
}

TEST(GsModule, MatchesStraightLineRecurrence) {
  std::mt19937_64 rng(5);
  GsFixture fx(rng, false, false);
  std::vector<Tensor> inputs;
  std::vector<Var> seq;
  for (int i = 0; i < 3; ++i) {
    inputs.push_back(random_tensor({1, 1, 4, 4}, rng));
    seq.push_back(fx.tape.constant(inputs.back()));
  }
  const Tensor& got = fx.tape.value(gs_module(fx.tape, seq, fx.gates, 0.01));

  Grid c(4, std::vector<double>(4, 0.0)), h = c;
  for (const Tensor& in : inputs) {
    const Grid v = to_grid(in);
    const Grid pf = conv(v, fx.kernels[0]), pi = conv(v, fx.kernels[1]), pc = conv(v, fx.kernels[2]),
               po = conv(v, fx.kernels[3]);
    const Grid hf = conv(h, fx.kernels[4]), hi = conv(h, fx.kernels[5]), hc = conv(h, fx.kernels[6]),
               ho = conv(h, fx.kernels[7]);
    for (int y = 0; y < 4; ++y)
      for (int x = 0; x < 4; ++x) {
        const double fg = sig(pf[y][x] + hf[y][x]);
        const double ig = sig(pi[y][x] + hi[y][x]);
        const double cand = lrelu(pc[y][x] + hc[y][x]);
        const double og = sig(po[y][x] + ho[y][x]);
        c[y][x] = fg * c[y][x] + ig * cand;
        h[y][x] = og * lrelu(c[y][x]);
      }
  }
  for (std::size_t y = 0; y < 4; ++y)
    for (std::size_t x = 0; x < 4; ++x) EXPECT_NEAR(got.at(0, 0, y, x), h[y][x], 1e-13);
}

TEST(Attention, EqualLogitsGiveMean) {
  std::mt19937_64 rng(6);
  Tape t;
  std::vector<Tensor> maps;
  std::vector<Var> seq;
  for (int i = 0; i < 4; ++i) {
    maps.push_back(random_tensor({1, 1, 3, 3}, rng));
    seq.push_back(t.constant(maps.back()));
  }
  const Tensor& out = t.value(attention_summarize(t, seq, t.constant(Tensor({1, 4, 1, 1}, 0.3))));
  for (std::size_t i = 0; i < 9; ++i) {
    EXPECT_NEAR(out[i], (maps[0][i] + maps[1][i] + maps[2][i] + maps[3][i]) / 4.0, 1e-14);
  }
}

TEST(Attention, DominantLogitSelectsMap) {
  std::mt19937_64 rng(7);
  Tape t;
  std::vector<Tensor> maps;
  std::vector<Var> seq;
  for (int i = 0; i < 3; ++i) {
    maps.push_back(random_tensor({1, 1, 3, 3}, rng));
    seq.push_back(t.constant(maps.back()));
  }
  const Tensor& out = t.value(attention_summarize(t, seq, t.constant(Tensor({1, 3, 1, 1}, std::vector<double>{0, 100, 0}))));
  for (std::size_t i = 0; i < 9; ++i) EXPECT_NEAR(out[i], maps[1][i], 1e-10);
  EXPECT_THROW(attention_summarize(t, seq, t.constant(Tensor({1, 4, 1, 1}))), ShapeError);
}

TEST(Forward, LogitShape) {
  const Dataset d = small_dataset(8, 10, 1);
  for (Variant v : {Variant::VIN, Variant::VIRN, Variant::GSVIN}) {
    const ModelConfig cfg = ModelConfig::for_map(v, 8, 8, 5);
    std::vector<std::size_t> idx(32);
    for (std::size_t i = 0; i < 32; ++i) idx[i] = i;
    const Tensor logits = forward_logits(cfg, init_params(cfg, 1), make_batch(d.train, idx));
    EXPECT_EQ(logits.shape(), (Shape{32, 8, 1, 1}));
  }
}

TEST(Forward, AgentOutsideMapIsRejected) {
  const ModelConfig cfg = ModelConfig::for_map(Variant::VIN, 8, 8, 3);
  const ParamSet p = init_params(cfg, 1);
  Tape t;
  const ModelVars vars = bind_params(t, cfg, p, false);
  const std::vector<Cell> agents{{8, 0}};
  EXPECT_THROW(forward(t, cfg, vars, t.constant(Tensor({1, 2, 8, 8})), agents), ValidationError);
}

TEST(Forward, TranslationConsistency) {
  std::mt19937_64 rng(8);
  for (Variant v : {Variant::VIN, Variant::VIRN, Variant::GSVIN}) {
    ModelConfig cfg;
    cfg.variant = v;
    cfg.f = 3;
    cfg.k = 3;
    cfg.reward_hidden = 12;
    const ParamSet p = init_params(cfg, 2);
    Tensor a({1, 2, 20, 20}), b({1, 2, 20, 20});
    for (std::size_t y = 6; y < 12; ++y)
      for (std::size_t x = 6; x < 12; ++x) {
        const double obstacle = rng() % 4 == 0 ? 1.0 : 0.0;
        a.at(0, 0, y, x) = obstacle;
        b.at(0, 0, y + 1, x + 1) = obstacle;
      }
    a.at(0, 1, 9, 8) = kGoalValue;
    b.at(0, 1, 10, 9) = kGoalValue;
    Tape t;
    const ModelVars vars = bind_params(t, cfg, p, false);
    const std::vector<Cell> ca{{8, 7}}, cb{{9, 8}};
    const Tensor qa = t.value(t.gather_cells(action_features(t, cfg, vars, t.constant(a)), ca));
    const Tensor qb = t.value(t.gather_cells(action_features(t, cfg, vars, t.constant(b)), cb));
    for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(qa[i], qb[i], 1e-13) << variant_name(v);
  }
}

TEST(Forward, EveryParameterReceivesGradient) {
  const Dataset d = small_dataset(8, 10, 2);
  const Batch batch = make_batch(d.train);
  for (Variant v : {Variant::VIN, Variant::VIRN, Variant::GSVIN}) {
    const ModelConfig cfg = ModelConfig::for_map(v, 8, 8, 5);
    const ParamSet p = init_params(cfg, 3);
    Tape t;
    const ModelVars vars = bind_params(t, cfg, p, true);
    t.backward(t.softmax_cross_entropy(forward(t, cfg, vars, t.constant(batch.input), batch.agents), batch.labels));
    std::vector<Var> all{vars.reward_hidden, vars.reward_out, vars.vi_kernel, vars.fc};
    if (v == Variant::GSVIN) {
      all.insert(all.end(), {vars.gs.w_f, vars.gs.w_i, vars.gs.w_c, vars.gs.w_o, vars.gs.u_f, vars.gs.u_i, vars.gs.u_c,
                             vars.gs.u_o});
    }
    if (v == Variant::VIRN) all.push_back(vars.attention);
    for (std::size_t i = 0; i < all.size(); ++i) {
      double norm = 0.0;
      for (double g : t.grad(all[i]).data()) norm += g * g;
      EXPECT_GT(norm, 0.0) << variant_name(v) << " parameter " << i;
    }
  }
}

TEST(Params, InitStatistics) {
  ModelConfig cfg;
  cfg.reward_hidden = 6000;
  const ParamSet p = init_params(cfg, 11);
  std::vector<double> all;
  for (const auto& e : p.entries()) all.insert(all.end(), e.value.data().begin(), e.value.data().end());
  ASSERT_GE(all.size(), 100000u);
  double mean = 0.0;
  for (double v : all) mean += v;
  mean /= static_cast<double>(all.size());
  double var = 0.0;
  for (double v : all) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / static_cast<double>(all.size() - 1));
  EXPECT_LT(std::abs(mean), 3 * 0.01 / std::sqrt(static_cast<double>(all.size())));
  EXPECT_NEAR(sd, 0.01, 0.0005);
  EXPECT_EQ(init_params(cfg, 11), p);
  EXPECT_NE(init_params(cfg, 12), p);
}

TEST(Params, Counts) {
  ModelConfig cfg = ModelConfig::for_map(Variant::GSVIN, 8, 8, 7);
  EXPECT_EQ(cfg.k, 4);
  EXPECT_EQ(vi_param_count(cfg), 8u * 2 * 49);
  EXPECT_EQ(gs_param_count(cfg), 72u);
  const std::size_t base = 150 * 2 * 9 + 150 + 8 * 2 * 49 + 64;
  EXPECT_EQ(init_params(cfg, 0).scalar_count(), base + 72);
  cfg.variant = Variant::VIN;
  EXPECT_EQ(init_params(cfg, 0).scalar_count(), base);
  cfg.variant = Variant::VIRN;
  EXPECT_EQ(init_params(cfg, 0).scalar_count(), base + 4);
}

TEST(Params, VariantNames) {
  EXPECT_EQ(parse_variant("gs-vin"), Variant::GSVIN);
  EXPECT_EQ(parse_variant("VIRN"), Variant::VIRN);
  EXPECT_THROW(parse_variant("lstm"), ValidationError);
  const ModelConfig cfg = ModelConfig::for_map(Variant::VIRN, 16, 16, 11, 0.5);
  EXPECT_EQ(nlohmann::json(cfg).get<ModelConfig>(), cfg);
}

TEST(PolicyGrids, AgreeWithPerCellForward) {
  const Dataset d = small_dataset(8, 3, 4);
  for (Variant v : {Variant::VIN, Variant::GSVIN}) {
    ModelConfig cfg = ModelConfig::for_map(v, 8, 8, 3);
    cfg.init_std = 0.3;
    const ParamSet p = init_params(cfg, 5);
    const std::vector<GridMap> maps{d.train[0].map, d.train[6].map};
    const auto grids = policy_grids(cfg, p, maps);
    ASSERT_EQ(grids.size(), 2u);
    for (std::size_t m = 0; m < maps.size(); ++m) {
      std::vector<PlanningSample> cells;
      for (std::size_t i = 0; i < maps[m].cells(); ++i) cells.push_back({maps[m], maps[m].cell(i), 0, 0});
      const Tensor logits = forward_logits(cfg, p, make_batch(cells));
      for (std::size_t i = 0; i < cells.size(); ++i) {
        EXPECT_EQ(grids[m][i], argmax_action(std::span<const double>(logits.ptr() + 8 * i, 8)));
      }
    }
  }
}

TEST(PolicyGrids, ArgmaxTieBreak) {
  const std::vector<double> tie{0, 2, 2, 1, 0, 0, 0, 0};
  EXPECT_EQ(argmax_action(tie), 1);
}
