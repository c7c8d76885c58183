#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <limits>

#include "gsvin/binio.hpp"
#include "gsvin/checkpoint.hpp"
#include "gsvin/errors.hpp"
#include "gsvin/training.hpp"

using namespace gsvin;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

Dataset small_dataset(int maps, std::uint64_t seed) {
  DatasetManifest m;
  m.height = 8;
  m.width = 8;
  m.maps = maps;
  m.seed = seed;
  return generate_dataset(m);
}

TrainConfig quick_config(int epochs, int batch = 32) {
  TrainConfig c;
  c.epochs = epochs;
  c.batch_size = batch;
  c.seed = 4;
  return c;
}

double sample_loss(const ModelConfig& cfg, const ParamSet& p, const PlanningSample& s) {
  return validate_model(cfg, p, std::span<const PlanningSample>(&s, 1), 1).loss;
}

}  // namespace

TEST(Divergence, PerBatchThresholds) {
  const DivergenceRules rules;
  EXPECT_EQ(detect_divergence(1.0, 1.0, rules), DivergenceTrigger::None);
  EXPECT_EQ(detect_divergence(kNaN, 1.0, rules), DivergenceTrigger::NonFiniteLoss);
  EXPECT_EQ(detect_divergence(kInf, 1.0, rules), DivergenceTrigger::NonFiniteLoss);
  EXPECT_EQ(detect_divergence(1.0, 1e6, rules), DivergenceTrigger::None);
  EXPECT_EQ(detect_divergence(1.0, 1.000001e6, rules), DivergenceTrigger::GradientExplosion);
  EXPECT_EQ(detect_divergence(1.0, kNaN, rules), DivergenceTrigger::GradientExplosion);
  EXPECT_EQ(detect_divergence(1.0, kInf, rules), DivergenceTrigger::GradientExplosion);
}

TEST(Divergence, SteadyDecreaseCompletes) {
  const DivergenceRules rules;
  DivergenceHistory h;
  for (int e = 0; e < 30; ++e) EXPECT_EQ(close_epoch(2.0 * std::pow(0.9, e), h, rules), DivergenceTrigger::None);
  EXPECT_EQ(h.reference_median, 2.0);
  EXPECT_EQ(h.streak, 0);
}

TEST(Divergence, BlowupNeedsThreeConsecutiveEpochs) {
  const DivergenceRules rules;
  DivergenceHistory h;
  EXPECT_EQ(close_epoch(1.0, h, rules), DivergenceTrigger::None);
  EXPECT_EQ(close_epoch(100.0, h, rules), DivergenceTrigger::None);  // exactly at the ratio
  EXPECT_EQ(h.streak, 0);
  EXPECT_EQ(close_epoch(101.0, h, rules), DivergenceTrigger::None);
  EXPECT_EQ(close_epoch(150.0, h, rules), DivergenceTrigger::None);
  EXPECT_EQ(close_epoch(50.0, h, rules), DivergenceTrigger::None);  // streak resets
  EXPECT_EQ(h.streak, 0);
  EXPECT_EQ(close_epoch(101.0, h, rules), DivergenceTrigger::None);
  EXPECT_EQ(close_epoch(101.0, h, rules), DivergenceTrigger::None);
  EXPECT_EQ(close_epoch(101.0, h, rules), DivergenceTrigger::LossBlowup);
}

TEST(Divergence, TriggerNamesRoundTrip) {
  for (auto t : {DivergenceTrigger::None, DivergenceTrigger::NonFiniteLoss, DivergenceTrigger::GradientExplosion,
                 DivergenceTrigger::LossBlowup}) {
    EXPECT_EQ(parse_trigger(trigger_name(t)), t);
  }
}

TEST(RmsProp, MatchesHandComputedSteps) {
  ParamSet p;
  p.add("w", Tensor({1, 1, 1, 2}, std::vector<double>{1.0, -2.0}));
  ParamSet g;
  g.add("w", Tensor({1, 1, 1, 2}, std::vector<double>{0.5, -3.0}));
  ParamSet slots = zero_slots(p);
  const OptimizerSpec spec;
  double w[2] = {1.0, -2.0}, ms[2] = {0.0, 0.0};
  const double grad[2] = {0.5, -3.0};
  for (int step = 0; step < 3; ++step) {
    rmsprop_step(p, g, slots, spec, 0.01);
    for (int i = 0; i < 2; ++i) {
      ms[i] = 0.9 * ms[i] + 0.1 * grad[i] * grad[i];
      w[i] -= 0.01 * grad[i] / (std::sqrt(ms[i]) + 1e-8);
      EXPECT_DOUBLE_EQ(p.get("w")[static_cast<std::size_t>(i)], w[i]);
      EXPECT_DOUBLE_EQ(slots.get("w")[static_cast<std::size_t>(i)], ms[i]);
    }
  }
}

TEST(Training, GradientNormAndChunking) {
  const Dataset d = small_dataset(6, 1);
  const ModelConfig cfg = ModelConfig::for_map(Variant::GSVIN, 8, 8, 5);
  const ParamSet p = init_params(cfg, 1);
  std::vector<std::size_t> idx(20);
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  const BatchGradient a = batch_gradient(cfg, p, d.train, idx, 32);
  const BatchGradient b = batch_gradient(cfg, p, d.train, idx, 3);
  EXPECT_NEAR(a.loss, b.loss, 1e-13);
  EXPECT_EQ(a.correct, b.correct);
  for (std::size_t e = 0; e < a.grads.size(); ++e)
    for (std::size_t i = 0; i < a.grads.entries()[e].value.size(); ++i)
      ASSERT_NEAR(a.grads.entries()[e].value[i], b.grads.entries()[e].value[i], 1e-13);
  double sq = 0.0;
  for (const auto& e : a.grads.entries())
    for (double v : e.value.data()) sq += v * v;
  EXPECT_DOUBLE_EQ(grad_norm(a.grads), std::sqrt(sq));
}

TEST(Training, SmallStepDecreasesSampleLoss) {
  const Dataset d = small_dataset(6, 2);
  const ModelConfig cfg = ModelConfig::for_map(Variant::GSVIN, 8, 8, 5);
  const ParamSet p0 = init_params(cfg, 2);
  for (std::size_t i = 0; i < 20; ++i) {
    const std::vector<std::size_t> one{i};
    const BatchGradient g = batch_gradient(cfg, p0, d.train, one, 1);
    ParamSet p = p0;
    ParamSet slots = zero_slots(p);
    rmsprop_step(p, g.grads, slots, {}, 1e-6);
    EXPECT_LT(sample_loss(cfg, p, d.train[i]), sample_loss(cfg, p0, d.train[i])) << "sample " << i;
  }
}

TEST(Training, OverfitsThirtyTwoSamples) {
  Dataset d = small_dataset(8, 3);
  d.train.resize(32);
  d.test.resize(6);
  const ModelConfig cfg = ModelConfig::for_map(Variant::GSVIN, 8, 8, 5);
  const TrainState s = train(cfg, d, quick_config(200));
  ASSERT_FALSE(s.record.diverged());
  EXPECT_EQ(validate_model(cfg, s.params, d.train, 32).accuracy, 1.0);
  EXPECT_LT(s.record.epochs.back().train_loss, s.record.epochs.front().train_loss);
}

TEST(Training, SeedFixedRunsAreIdentical) {
  const Dataset d = small_dataset(10, 4);
  const ModelConfig cfg = ModelConfig::for_map(Variant::VIRN, 8, 8, 3);
  const TrainState a = train(cfg, d, quick_config(3));
  const TrainState b = train(cfg, d, quick_config(3));
  EXPECT_EQ(a.record.loss_trajectory(), b.record.loss_trajectory());
  EXPECT_EQ(a.params, b.params);
  TrainConfig other = quick_config(3);
  other.seed = 5;
  EXPECT_NE(train(cfg, d, other).record.loss_trajectory(), a.record.loss_trajectory());
}

TEST(Training, HugeLearningRateDiverges) {
  const Dataset d = small_dataset(10, 5);
  const ModelConfig cfg = ModelConfig::for_map(Variant::GSVIN, 8, 8, 3);
  TrainConfig tc = quick_config(5);
  tc.learning_rate = 1e3;
  const TrainState s = train(cfg, d, tc);
  EXPECT_TRUE(s.record.diverged());
  EXPECT_NE(s.record.trigger, DivergenceTrigger::None);
  EXPECT_GE(s.record.trigger_epoch, 1);
  EXPECT_LT(s.epochs_done, 5);
}

TEST(Training, ConfigValidationAndHash) {
  TrainConfig tc;
  EXPECT_NO_THROW(tc.validate());
  tc.epochs = -1;
  EXPECT_THROW(tc.validate(), ValidationError);
  tc = TrainConfig{};
  tc.learning_rate = -1;
  EXPECT_THROW(tc.validate(), ValidationError);

  const ModelConfig cfg;
  const DatasetManifest m;
  TrainConfig a, b;
  b.checkpoint_dir = "/elsewhere";
  EXPECT_EQ(config_hash(cfg, a, m), config_hash(cfg, b, m));
  b.learning_rate = 0.01;
  EXPECT_NE(config_hash(cfg, a, m), config_hash(cfg, b, m));
  EXPECT_EQ(nlohmann::json(a).get<TrainConfig>(), a);
}

TEST(Checkpoint, RoundTripIsBitwise) {
  const Dataset d = small_dataset(6, 6);
  const ModelConfig cfg = ModelConfig::for_map(Variant::GSVIN, 8, 8, 3);
  const TrainState s = train(cfg, d, quick_config(2));
  const std::string bytes = encode_checkpoint(s);
  const TrainState r = decode_checkpoint(bytes);
  EXPECT_EQ(r.params, s.params);
  EXPECT_EQ(r.slots, s.slots);
  EXPECT_EQ(r.epochs_done, s.epochs_done);
  EXPECT_EQ(r.steps, s.steps);
  EXPECT_EQ(r.history, s.history);
  EXPECT_EQ(r.record.model, s.record.model);
  EXPECT_EQ(r.record.epochs, s.record.epochs);
  EXPECT_EQ(r.record.config_hash, s.record.config_hash);
  EXPECT_EQ(encode_checkpoint(r), bytes);
}

TEST(Checkpoint, CorruptionIsRejected) {
  const Dataset d = small_dataset(5, 7);
  const ModelConfig cfg = ModelConfig::for_map(Variant::VIN, 8, 8, 3);
  const std::string good = encode_checkpoint(train(cfg, d, quick_config(1)));

  std::string flipped = good;
  flipped[good.size() - 40] ^= 0x01;
  EXPECT_THROW(decode_checkpoint(flipped), FormatError);
  EXPECT_THROW(decode_checkpoint(good.substr(0, 20)), FormatError);

  std::string version = good.substr(0, good.size() - 4);
  version[7] = 2;
  ByteWriter w;
  w.raw(version);
  w.seal();
  EXPECT_THROW(decode_checkpoint(w.bytes()), FormatError);
}

TEST(Checkpoint, ResumeContinuesTheSameTrajectory) {
  const Dataset d = small_dataset(8, 8);
  const ModelConfig cfg = ModelConfig::for_map(Variant::GSVIN, 8, 8, 3);
  const TrainState straight = train(cfg, d, quick_config(4));

  const auto path = std::filesystem::temp_directory_path() / "gsvin_resume_test.gsck";
  save_checkpoint(path, train(cfg, d, quick_config(2)));
  const TrainState resumed = resume(load_checkpoint(path), d, quick_config(4));
  std::filesystem::remove(path);

  EXPECT_EQ(resumed.epochs_done, 4);
  EXPECT_EQ(resumed.record.loss_trajectory(), straight.record.loss_trajectory());
  EXPECT_EQ(resumed.params, straight.params);
  EXPECT_EQ(resumed.slots, straight.slots);
}

TEST(Checkpoint, PeriodicCheckpointsAndCallback) {
  const Dataset d = small_dataset(5, 9);
  const ModelConfig cfg = ModelConfig::for_map(Variant::VIN, 8, 8, 3);
  const auto dir = std::filesystem::temp_directory_path() / "gsvin_ckpt_test";
  std::filesystem::remove_all(dir);
  TrainConfig tc = quick_config(3);
  tc.checkpoint_every = 2;
  tc.checkpoint_dir = dir;
  int calls = 0;
  train(cfg, d, tc, [&](const TrainState& s) { EXPECT_EQ(s.epochs_done, ++calls); });
  EXPECT_EQ(calls, 3);
  EXPECT_TRUE(std::filesystem::exists(dir / "epoch-0002.gsck"));
  EXPECT_EQ(load_checkpoint(dir / "epoch-0002.gsck").epochs_done, 2);
  std::filesystem::remove_all(dir);
}
