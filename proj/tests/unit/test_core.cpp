#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"
#include "tide/core.hpp"
#include "tide/error.hpp"
#include "tide/layers.hpp"

using namespace tide;

TEST(Image, ConstantImagePassesValidation) {
  Image img(64, 64, 0.5f);
  const Image& out = validate_image(img, 3);
  EXPECT_EQ(&out, &img);
}

TEST(Image, OutOfRangeElementRejected) {
  Image img(64, 64, 0.5f);
  img.at(1, 10, 20) = 1.2f;
  try {
    validate_image(img, 3);
    FAIL() << "expected OutOfRange";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::OutOfRange);
  }
}

TEST(Image, IndivisibleHeightRejected) {
  Image img(63, 64, 0.5f);
  try {
    validate_image(img, 3);
    FAIL() << "expected BadShape";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BadShape);
  }
  EXPECT_THROW(validate_image(Image(4, 4, 0.5f), 1), Error);  // below the 8x8 minimum
}

TEST(Image, WrongChannelCountRejected) {
  Tensor<float> t(Shape{1, 4, 16, 16}, 0.5f);
  EXPECT_THROW(validate_image_tensor(t, 3), Error);
}

TEST(Clamp, ExamplesAndIdempotence) {
  Tensor<float> t(Shape{1, 3, 1, 1}, std::vector<float>{1.5f, -0.2f, 0.37f});
  const auto c = clamp01(t);
  EXPECT_EQ(c[0], 1.0f);
  EXPECT_EQ(c[1], 0.0f);
  EXPECT_EQ(c[2], 0.37f);
  std::mt19937 rng(1);
  const auto r = test::random_tensor<float>(Shape{1, 3, 8, 8}, rng, -2, 2);
  const auto once = clamp01(r), twice = clamp01(once);
  for (std::size_t i = 0; i < once.size(); ++i) EXPECT_EQ(once[i], twice[i]);
  EXPECT_NO_THROW(validate_image(Image(once), 3));
}

TEST(ModelConfig, Presets) {
  const auto toy = ModelConfig::toy();
  EXPECT_EQ(toy.n_down, 3);
  EXPECT_EQ(toy.base_channels, 16);
  EXPECT_EQ(toy.max_channels, 64);
  EXPECT_EQ(toy.deg_base_channels, 8);
  EXPECT_EQ(toy.bottleneck_blocks, 2);
  EXPECT_EQ(toy.detail_blocks, 2);
  EXPECT_DOUBLE_EQ(toy.negative_slope, 0.2);
  const auto full = ModelConfig::full();
  EXPECT_EQ(full.n_down, 5);
  EXPECT_EQ(full.base_channels, 64);
  EXPECT_EQ(full.max_channels, 512);
  EXPECT_EQ(full.deg_base_channels, 32);
  EXPECT_EQ(full.k_types, 4);
}

TEST(ModelConfig, ChannelScheduleIsCapped) {
  const auto full = ModelConfig::full();
  const int expected[] = {64, 128, 256, 512, 512, 512};
  for (int i = 0; i <= 5; ++i) EXPECT_EQ(full.channels_at(i), expected[i]);
}

TEST(ModelConfig, ValidationRejectsBadValues) {
  ModelConfig c;
  c.k_types = 3;
  EXPECT_THROW(c.validate(), Error);
  c = ModelConfig{};
  c.n_down = 0;
  EXPECT_THROW(c.validate(), Error);
  c = ModelConfig{};
  c.base_channels = 2;
  EXPECT_THROW(c.validate(), Error);
}

TEST(LossWeights, Defaults) {
  const LossWeights w;
  EXPECT_DOUBLE_EQ(w.l1, 1.0);
  EXPECT_DOUBLE_EQ(w.ssim, 0.1);
  EXPECT_DOUBLE_EQ(w.perceptual, 0.1);
  EXPECT_DOUBLE_EQ(w.diversity, 0.05);
  EXPECT_DOUBLE_EQ(w.consistency, 0.1);
  EXPECT_DOUBLE_EQ(w.aux, 0.1);
  EXPECT_DOUBLE_EQ(w.magnitude, 0.1);
  EXPECT_DOUBLE_EQ(w.improve, 0.5);
  EXPECT_DOUBLE_EQ(w.base_combined, 0.7);
  EXPECT_DOUBLE_EQ(w.refine_combined, 1.0);
  EXPECT_DOUBLE_EQ(w.epsilon, 0.01);
}

TEST(Batch, RoundTrip) {
  std::mt19937 rng(2);
  std::vector<Image> imgs{test::random_image(8, 16, rng), test::random_image(8, 16, rng)};
  const auto b = batch_images(imgs);
  EXPECT_EQ(b.shape(), (Shape{2, 3, 8, 16}));
  const Image second = image_from_batch(b, 1);
  for (std::size_t i = 0; i < second.tensor().size(); ++i) EXPECT_EQ(second.tensor()[i], imgs[1].tensor()[i]);
}

TEST(ParamStore, InitializationIsPerNameAndSeeded) {
  nn::ParamStore<float> a, b;
  a.add("x.weight", Shape{4, 3, 3, 3}, nn::Init::Kaiming, 27);
  a.add("x.bias", Shape{4, 1, 1, 1}, nn::Init::Zero);
  b.add("other.weight", Shape{2, 2, 1, 1}, nn::Init::Kaiming, 2);  // extra tensor first
  b.add("x.weight", Shape{4, 3, 3, 3}, nn::Init::Kaiming, 27);
  a.initialize(7, 0.2);
  b.initialize(7, 0.2);
  const auto& wa = a.at(a.find("x.weight")).value;
  const auto& wb = b.at(b.find("x.weight")).value;
  for (std::size_t i = 0; i < wa.size(); ++i) EXPECT_EQ(wa[i], wb[i]);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(a.at(1).value[i], 0.0f);
}

TEST(ParamStore, KaimingScale) {
  nn::ParamStore<double> ps;
  const int fan_in = 64 * 9;
  ps.add("w", Shape{256, 64, 3, 3}, nn::Init::Kaiming, fan_in);
  ps.initialize(3, 0.2);
  const auto& w = ps.at(0).value;
  double s = 0;
  for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * w[i];
  const double expected = 2.0 / (1.04 * fan_in);
  EXPECT_NEAR(s / w.size(), expected, 0.02 * expected);
}

TEST(ParamStore, TrainableAndCounts) {
  nn::ParamStore<float> ps;
  ps.add("base.a", Shape{2, 3, 1, 1}, nn::Init::Zero);
  ps.add("refine.b", Shape{5, 1, 1, 1}, nn::Init::Constant, 1, 0.1);
  EXPECT_EQ(ps.count(), 11u);
  EXPECT_EQ(ps.count("base."), 6u);
  EXPECT_FLOAT_EQ(ps.at(1).value[0], 0.1f);
  ps.set_trainable("base.", false);
  EXPECT_FALSE(ps.at(0).trainable);
  EXPECT_TRUE(ps.at(1).trainable);
  EXPECT_FALSE(ps.var(0).requires_grad());
  EXPECT_TRUE(ps.var(1).requires_grad());
  EXPECT_THROW(ps.add("base.a", Shape{1, 1, 1, 1}, nn::Init::Zero), Error);
}

TEST(ParamStore, CollectsGradients) {
  nn::ParamStore<double> ps;
  const int id = ps.add("w", Shape{1, 1, 1, 1}, nn::Init::Constant, 1, 3.0);
  const auto w = ps.var(id);
  (w * w).backward();
  ps.collect_grads();
  EXPECT_DOUBLE_EQ(ps.at(id).grad[0], 6.0);
  ps.zero_grads();
  EXPECT_DOUBLE_EQ(ps.at(id).grad[0], 0.0);
}

TEST(Layers, ConvChecksChannels) {
  nn::ParamStore<float> ps;
  nn::Conv<float> conv(ps, "c", 3, 8);
  EXPECT_THROW(conv(ag::Var<float>(Tensor<float>(Shape{1, 4, 8, 8}))), Error);
  EXPECT_THROW(nn::Conv<float>(ps, "g", 6, 8, 3, 1, 4), Error);
  ps.initialize(1, 0.2);
  const auto y = conv(ag::Var<float>(Tensor<float>(Shape{1, 3, 8, 8}, 0.5f)));
  EXPECT_EQ(y.shape(), (Shape{1, 8, 8, 8}));
}

TEST(Layers, ChannelGateScalesInUnitInterval) {
  nn::ParamStore<float> ps;
  nn::ChannelGate<float> gate(ps, "g", 16, 4);
  ps.initialize(2, 0.2);
  std::mt19937 rng(1);
  const ag::Var<float> x(test::random_tensor<float>(Shape{2, 16, 4, 4}, rng));
  const auto s = gate.scale(x);
  EXPECT_EQ(s.shape(), (Shape{2, 16, 1, 1}));
  for (std::size_t i = 0; i < s.value().size(); ++i) {
    EXPECT_GE(s.value()[i], 0.0f);
    EXPECT_LE(s.value()[i], 1.0f);
  }
}
