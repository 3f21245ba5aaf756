#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <limits>
#include <random>
#include <sstream>

#include "oracles/reference.hpp"
#include "srru/checkpoint.hpp"
#include "srru/train.hpp"

using namespace srru;

namespace {

std::mt19937_64& rng() {
  static std::mt19937_64 r(8);
  return r;
}

TrainingConfig tiny_config() {
  TrainingConfig c = desk_preset();
  c.channels = 8;
  c.n_units = 2;
  c.patch_size = 16;
  c.batch_size = 2;
  c.steps_per_epoch = 2;
  return c;
}

ImagePlane textured(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 r(seed);
  auto planes = detail::procedural_image(n, r);
  planes[1].range = ValueRange::Unit;
  return rescale_range(planes[1], ValueRange::Byte);
}

PatchSampler tiny_sampler(const TrainingConfig& c) {
  return PatchSampler({textured(40, 1), textured(40, 2)}, {"a", "b"}, c.patch_size, c.scale,
                      c.rng_seed, c.augment);
}

template <typename T>
bool same_params(const NetworkParams<T>& a, const NetworkParams<T>& b) {
  std::vector<const ConvParams<T>*> pa, pb;
  for_each_conv(a, [&](const std::string&, const ConvParams<T>& c) { pa.push_back(&c); });
  for_each_conv(b, [&](const std::string&, const ConvParams<T>& c) { pb.push_back(&c); });
  if (pa.size() != pb.size()) return false;
  for (std::size_t i = 0; i < pa.size(); ++i)
    if (!(*pa[i] == *pb[i])) return false;
  return true;
}

}  // namespace

// --- losses --------------------------------------------------------------------

TEST(Charbonnier, EqualInputsGiveEps) {
  const auto a = oracle::random_tensor<double>({1, 1, 4, 4}, rng());
  EXPECT_NEAR(charbonnier_loss(a, a, 1e-3).value, 1e-3, 1e-18);
}

TEST(Charbonnier, ApproachesL1) {
  const Tensor<double> p({1, 1, 1, 1}, std::vector<double>{5.0}), t({1, 1, 1, 1}, std::vector<double>{2.0});
  EXPECT_NEAR(charbonnier_loss(p, t, 1e-9).value, 3.0, 1e-12);
}

TEST(Charbonnier, GradientMatchesFiniteDifferences) {
  auto p = oracle::random_tensor<double>({2, 1, 5, 5}, rng());
  const auto t = oracle::random_tensor<double>({2, 1, 5, 5}, rng());
  const auto g = charbonnier_loss(p, t, 1e-3).grad;
  const auto num = oracle::numeric_gradient([&] { return charbonnier_loss(p, t, 1e-3).value; }, p.data());
  EXPECT_LT(oracle::max_relative_error(g.storage(), num), 1e-6);
}

TEST(Charbonnier, ShapeMismatchThrows) {
  EXPECT_THROW(charbonnier_loss(Tensor<float>(1, 1, 2, 2), Tensor<float>(1, 1, 2, 3)), ShapeError);
}

TEST(L2Loss, ValueAndGradient) {
  auto p = oracle::random_tensor<double>({1, 1, 3, 3}, rng());
  const auto t = oracle::random_tensor<double>({1, 1, 3, 3}, rng());
  const auto g = l2_loss(p, t).grad;
  const auto num = oracle::numeric_gradient([&] { return l2_loss(p, t).value; }, p.data());
  EXPECT_LT(oracle::max_relative_error(g.storage(), num), 1e-6);
}

// --- optimizer -------------------------------------------------------------------

TEST(Sgd, PlainStepWithoutMomentumOrDecay) {
  auto net = make_network<double>(ArchConfig{.channels = 4, .n_units = 1}, 1);
  const auto before = net;
  auto grads = zeros_like(net);
  for_each_conv(grads, [](const std::string&, ConvParams<double>& c) {
    for (auto& w : c.weights.storage()) w = 0.5;
    for (auto& b : c.bias) b = -2.0;
  });
  auto state = OptimizerState<double>::for_params(net);
  sgd_step(net, grads, state, SgdSettings{0.1, 0.0, 0.0});
  std::vector<const ConvParams<double>*> old;
  for_each_conv(before, [&](const std::string&, const ConvParams<double>& c) { old.push_back(&c); });
  std::size_t i = 0;
  for_each_conv(net, [&](const std::string&, const ConvParams<double>& c) {
    for (std::size_t k = 0; k < c.weights.size(); ++k) EXPECT_DOUBLE_EQ(c.weights[k], old[i]->weights[k] - 0.05);
    for (std::size_t k = 0; k < c.bias.size(); ++k) EXPECT_DOUBLE_EQ(c.bias[k], old[i]->bias[k] + 0.2);
    ++i;
  });
  EXPECT_EQ(state.step, 1u);
}

TEST(Sgd, ZeroGradientZeroVelocityIsNoop) {
  auto net = make_network<float>(ArchConfig{.channels = 4, .n_units = 1}, 1);
  const auto before = net;
  auto state = OptimizerState<float>::for_params(net);
  sgd_step(net, zeros_like(net), state, SgdSettings{0.1, 0.9, 0.0});
  EXPECT_TRUE(same_params(net, before));
}

TEST(Sgd, MomentumRecurrenceOnQuadratic) {
  // f(w) = 0.5 * a * w^2 on one scalar; g = a * w.
  auto net = make_network<double>(ArchConfig{.channels = 4, .n_units = 1}, 1);
  double& w = net.levels[0].feature.weights[0];
  w = 2.0;
  const double a = 3.0, lr = 0.05, mu = 0.9, wd = 1e-2;
  auto state = OptimizerState<double>::for_params(net);
  double hw = 2.0, hv = 0.0;
  for (int step = 0; step < 2; ++step) {
    auto grads = zeros_like(net);
    grads.levels[0].feature.weights[0] = a * w;
    sgd_step(net, grads, state, SgdSettings{lr, mu, wd});
    hv = mu * hv - lr * (a * hw + wd * hw);
    hw = hw + hv;
    EXPECT_DOUBLE_EQ(w, hw);
  }
  EXPECT_DOUBLE_EQ(hw, 2.0 - 0.05 * 6.02 + (0.9 * -0.05 * 6.02 - 0.05 * 3.01 * (2.0 - 0.301)));
}

TEST(Sgd, NanGradientNamesParameterAndLeavesWeights) {
  auto net = make_network<float>(ArchConfig{.channels = 4, .n_units = 1}, 1);
  const auto before = net;
  auto grads = zeros_like(net);
  grads.levels[0].unit.h2b.weights[3] = std::numeric_limits<float>::quiet_NaN();
  auto state = OptimizerState<float>::for_params(net);
  try {
    sgd_step(net, grads, state, SgdSettings{0.1, 0.9, 1e-4});
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("level0.unit.h2b.weight"), std::string::npos);
  }
  EXPECT_TRUE(same_params(net, before));
}

TEST(Schedule, HalvingBoundaries) {
  TrainingConfig c;
  EXPECT_DOUBLE_EQ(lr_schedule(0, c), 1e-5);
  EXPECT_DOUBLE_EQ(lr_schedule(79, c), 1e-5);
  EXPECT_DOUBLE_EQ(lr_schedule(80, c), 5e-6);
  EXPECT_DOUBLE_EQ(lr_schedule(160, c), 2.5e-6);
  c.lr_halving_epochs = 100;
  EXPECT_DOUBLE_EQ(lr_schedule(99, c), 1e-5);
  EXPECT_DOUBLE_EQ(lr_schedule(100, c), 5e-6);
}

// --- training loop -------------------------------------------------------------------

TEST(TrainEpoch, ZeroLearningRateKeepsParametersBitIdentical) {
  TrainingConfig c = tiny_config();
  c.learning_rate = 0.0;
  auto net = make_network<float>(c.arch(), 3);
  const auto before = net;
  auto sampler = tiny_sampler(c);
  auto state = OptimizerState<float>::for_params(net);
  const auto st = train_epoch(net, sampler, c, state, 0);
  EXPECT_TRUE(same_params(net, before));
  EXPECT_GT(st.mean_loss, 0.0);
  EXPECT_GE(st.wall_seconds, 0.0);
}

TEST(TrainEpoch, FixedBatchLossDecreases) {
  TrainingConfig c = tiny_config();
  c.learning_rate = 0.01;
  c.momentum = 0.0;
  c.weight_decay = 0.0;
  auto net = make_network<float>(c.arch(), 4);
  auto sampler = tiny_sampler(c);
  const Batch batch = collate(sampler.next_batch(2));
  auto state = OptimizerState<float>::for_params(net);
  std::vector<double> losses;
  for (int s = 0; s < 200; ++s) losses.push_back(train_step(net, state, batch.lr, batch.targets, c, c.learning_rate).loss);
  int decreases = 0;
  for (std::size_t i = 1; i < losses.size(); ++i) decreases += losses[i] < losses[i - 1];
  EXPECT_GE(decreases, static_cast<int>(0.95 * (losses.size() - 1))) << "first " << losses.front() << " last " << losses.back();
  EXPECT_LT(losses.back(), losses.front());
}

TEST(TrainEpoch, SeededRunsAreIdentical) {
  TrainingConfig c = tiny_config();
  auto run = [&] {
    auto net = make_network<float>(c.arch(), c.rng_seed);
    auto sampler = tiny_sampler(c);
    auto state = OptimizerState<float>::for_params(net);
    for (std::size_t e = 0; e < 3; ++e) train_epoch(net, sampler, c, state, e);
    return net;
  };
  EXPECT_TRUE(same_params(run(), run()));
}

TEST(TrainEpoch, SharedUnitStorageSurvivesTraining) {
  TrainingConfig c = tiny_config();
  auto net = make_network<float>(c.arch(), 2);
  auto sampler = tiny_sampler(c);
  auto state = OptimizerState<float>::for_params(net);
  for (std::size_t e = 0; e < 2; ++e) train_epoch(net, sampler, c, state, e);
  LevelCache<float> cache;
  level_forward(collate(sampler.next_batch(1)).lr, net.levels[0], c.arch(), &cache);
  for (const auto& u : cache.units) EXPECT_EQ(u.params, &net.levels[0].unit);
}

TEST(TrainEpoch, NumericalFailureReportsBatch) {
  TrainingConfig c = tiny_config();
  auto net = make_network<float>(c.arch(), 2);
  net.levels[0].feature.weights[0] = std::numeric_limits<float>::infinity();
  auto sampler = tiny_sampler(c);
  auto state = OptimizerState<float>::for_params(net);
  try {
    train_epoch(net, sampler, c, state, 4);
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("epoch 4, batch 0"), std::string::npos);
  }
}

TEST(TrainEpoch, ScaleFourDeepSupervision) {
  TrainingConfig c = tiny_config();
  c.scale = 4;
  auto net = make_network<float>(c.arch(), 2);
  auto sampler = tiny_sampler(c);
  const Batch b = collate(sampler.next_batch(2));
  ASSERT_EQ(b.targets.size(), 2u);
  auto state = OptimizerState<float>::for_params(net);
  const auto outs = network_forward(b.lr, net);
  double expected = 0;
  for (std::size_t l = 0; l < 2; ++l) expected += charbonnier_loss(outs[l], b.targets[l]).value;
  EXPECT_DOUBLE_EQ(train_step(net, state, b.lr, b.targets, c, 0.0).loss, expected);
}

// --- config ---------------------------------------------------------------------------

TEST(Config, DefaultsMirrorPublishedSetup) {
  const TrainingConfig c;
  EXPECT_DOUBLE_EQ(c.learning_rate, 1e-5);
  EXPECT_EQ(c.lr_halving_epochs, 80u);
  EXPECT_EQ(c.batch_size, 64u);
  EXPECT_EQ(c.patch_size, 128u);
  EXPECT_EQ(c.n_units, 6u);
  EXPECT_EQ(c.channels, 64u);
  EXPECT_EQ(c.reduction_ratio, 4u);
}

TEST(Config, DeskPreset) {
  const auto d = desk_preset();
  EXPECT_EQ(d.channels, 16u);
  EXPECT_EQ(d.n_units, 2u);
  EXPECT_EQ(d.patch_size, 48u);
  EXPECT_EQ(d.batch_size, 8u);
  EXPECT_EQ(d.epochs * d.steps_per_epoch, 300u);
  EXPECT_EQ(d.lr_halving_epochs, 100u);
}

TEST(Config, ParseCommentsAndOverrides) {
  const auto c = parse_config_text(
      "# comment line\n"
      "scale = 4   # trailing\n"
      "\n"
      "fusion_enabled=false\n"
      "learning_rate = 0.25\n");
  EXPECT_EQ(c.scale, 4u);
  EXPECT_FALSE(c.fusion_enabled);
  EXPECT_DOUBLE_EQ(c.learning_rate, 0.25);
  EXPECT_EQ(c.batch_size, 64u);
  TrainingConfig d = c;
  apply_override(d, "batch_size=3");
  EXPECT_EQ(d.batch_size, 3u);
}

TEST(Config, Errors) {
  EXPECT_THROW(parse_config_text("nonsense_key = 1\n"), ConfigError);
  EXPECT_THROW(parse_config_text("scale 2\n"), ConfigError);
  EXPECT_THROW(parse_config_text("scale = two\n"), ConfigError);
  EXPECT_THROW(parse_config_text("fusion_enabled = maybe\n"), ConfigError);
  TrainingConfig c;
  c.scale = 3;
  EXPECT_THROW(validate(c), std::invalid_argument);
  c = TrainingConfig{};
  c.patch_size = 127;
  EXPECT_THROW(validate(c), ConfigError);
}

TEST(Config, TextRoundTrip) {
  TrainingConfig c = desk_preset();
  c.learning_rate = 0.1 + 0.2;  // not exactly representable
  c.loss_kind = LossKind::L2;
  c.corpus = "/data/some dir";
  EXPECT_EQ(parse_config_text(config_to_text(c)), c);
}

// --- checkpoint -----------------------------------------------------------------------

TEST(Checkpoint, RoundTripIsBitExact) {
  TrainingConfig c = tiny_config();
  c.scale = 4;
  Checkpoint ck{c, make_network<float>(c.arch(), 5), {}, 7};
  ck.optimizer = OptimizerState<float>::for_params(ck.params);
  auto sampler = tiny_sampler(c);
  train_epoch(ck.params, sampler, c, ck.optimizer, 0);

  std::stringstream a;
  save_checkpoint(a, ck);
  const std::string bytes = a.str();
  EXPECT_EQ(bytes.substr(0, 4), "SRRU");
  EXPECT_EQ(static_cast<unsigned char>(bytes[4]), 1);
  EXPECT_EQ(static_cast<unsigned char>(bytes[5]), 0);

  std::stringstream in(bytes);
  const Checkpoint back = load_checkpoint(in);
  EXPECT_EQ(back.config, ck.config);
  EXPECT_EQ(back.epoch, 7u);
  EXPECT_EQ(back.optimizer.step, ck.optimizer.step);
  EXPECT_EQ(back.optimizer.learning_rate, ck.optimizer.learning_rate);
  EXPECT_TRUE(same_params(back.params, ck.params));
  EXPECT_TRUE(same_params(back.optimizer.velocity, ck.optimizer.velocity));

  std::stringstream again;
  save_checkpoint(again, back);
  EXPECT_EQ(again.str(), bytes);

  const auto probe = oracle::random_tensor<float>({1, 1, 9, 7}, rng(), 0.0, 1.0);
  const auto o1 = network_forward(probe, ck.params), o2 = network_forward(probe, back.params);
  for (std::size_t l = 0; l < o1.size(); ++l) EXPECT_EQ(o1[l], o2[l]);
}

TEST(Checkpoint, RecordLayoutIsLittleEndian) {
  TrainingConfig c = tiny_config();
  Checkpoint ck{c, make_network<float>(c.arch(), 5), {}, 0};
  ck.optimizer = OptimizerState<float>::for_params(ck.params);
  std::stringstream s;
  save_checkpoint(s, ck);
  std::string bytes = s.str();
  const auto u32 = [&](std::size_t off) {
    return static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[off])) |
           static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[off + 1])) << 8 |
           static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[off + 2])) << 16 |
           static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[off + 3])) << 24;
  };
  const std::uint32_t text_len = u32(6);
  std::size_t off = 10 + text_len;
  const std::uint32_t name_len = u32(off);
  EXPECT_EQ(bytes.substr(off + 4, name_len), "level0.feature.weight");
  off += 4 + name_len;
  EXPECT_EQ(u32(off), 4u);
  EXPECT_EQ(u32(off + 4), 8u);   // out channels
  EXPECT_EQ(u32(off + 8), 1u);   // in channels
  EXPECT_EQ(u32(off + 12), 3u);  // kh
  EXPECT_EQ(u32(off + 16), 3u);  // kw
  const float first = std::bit_cast<float>(u32(off + 20));
  EXPECT_EQ(first, ck.params.levels[0].feature.weights[0]);
}

TEST(Checkpoint, CorruptInputsRejected) {
  std::stringstream bad("XXXX");
  EXPECT_THROW(load_checkpoint(bad), IoError);
  TrainingConfig c = tiny_config();
  Checkpoint ck{c, make_network<float>(c.arch(), 5), {}, 0};
  ck.optimizer = OptimizerState<float>::for_params(ck.params);
  std::stringstream s;
  save_checkpoint(s, ck);
  const std::string bytes = s.str();
  std::stringstream truncated(bytes.substr(0, bytes.size() - 3));
  EXPECT_THROW(load_checkpoint(truncated), IoError);
  std::string wrong_version = bytes;
  wrong_version[4] = 9;
  std::stringstream wv(wrong_version);
  EXPECT_THROW(load_checkpoint(wv), IoError);
  EXPECT_THROW(load_checkpoint(std::filesystem::path("/nonexistent/ck.srru")), IoError);
}
