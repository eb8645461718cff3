#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "support.hpp"
#include "tide/baselines.hpp"
#include "tide/error.hpp"

using namespace tide;
using namespace tide::baselines;

namespace {

std::array<double, 3> channel_means(const Image& img) {
  std::array<double, 3> m{};
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < img.h(); ++y)
      for (int x = 0; x < img.w(); ++x) m[c] += img.at(c, y, x);
    m[c] /= img.h() * img.w();
  }
  return m;
}

// Blue-green cast: red attenuated, blue lifted.
Image underwater(int h, int w, std::mt19937& rng) {
  Image img = test::random_image(h, w, rng);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      img.at(0, y, x) *= 0.3f;
      img.at(1, y, x) = 0.2f + 0.6f * img.at(1, y, x);
      img.at(2, y, x) = 0.4f + 0.5f * img.at(2, y, x);
    }
  return img;
}

}  // namespace

TEST(Methods, NamesRoundTrip) {
  for (const char* n : {"wb", "gamma", "he", "clahe", "dcp", "udcp", "rcp"})
    EXPECT_EQ(to_string(method_from_string(n)), n);
  try {
    method_from_string("retinex");
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnknownMethod);
  }
}

TEST(Methods, PreserveRange) {
  std::mt19937 rng(1);
  const Image img = underwater(32, 48, rng);
  for (const char* n : {"wb", "gamma", "he", "clahe", "dcp", "udcp", "rcp"}) {
    const Image out = apply_baseline(img, method_from_string(n));
    EXPECT_EQ(out.h(), 32) << n;
    EXPECT_EQ(out.w(), 48) << n;
    test::expect_in_unit_interval(out.tensor());
  }
}

TEST(WhiteBalance, EqualizesChannelMeans) {
  std::mt19937 rng(2);
  for (int t = 0; t < 5; ++t) {
    const Image img = underwater(32, 32, rng);
    const auto in = channel_means(img);
    const double global = (in[0] + in[1] + in[2]) / 3;
    const auto out = channel_means(white_balance(img));
    for (int c = 0; c < 3; ++c) EXPECT_NEAR(out[c], global, 1e-3);
  }
}

TEST(WhiteBalance, NeutralImageIsFixedPoint) {
  std::mt19937 rng(3);
  Image img = test::random_image(16, 16, rng);
  // Gray pixels, so the channel means already agree.
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) {
      const float v = img.at(0, y, x);
      img.at(0, y, x) = v, img.at(1, y, x) = v, img.at(2, y, x) = v;
    }
  const Image out = white_balance(img);
  for (std::size_t i = 0; i < img.tensor().size(); ++i) ASSERT_NEAR(out.tensor()[i], img.tensor()[i], 1e-6);
}

TEST(Gamma, AnalyticAndMonotone) {
  const Image out = gamma_correct(Image(8, 8, 0.5f), 1.5);
  for (std::size_t i = 0; i < out.tensor().size(); ++i) ASSERT_NEAR(out.tensor()[i], 0.62996, 1e-5);
  float prev = -1;
  for (int k = 0; k <= 20; ++k) {
    const float v = gamma_correct(Image(8, 8, k / 20.0f), 1.5).at(0, 0, 0);
    EXPECT_GE(v, prev);
    prev = v;
  }
}

TEST(HistEq, FlattensLumaHistogram) {
  std::mt19937 rng(4);
  Image img(64, 64);
  std::normal_distribution<float> n(0.4f, 0.05f);
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x) {
      const float v = std::clamp(n(rng), 0.0f, 1.0f);
      for (int c = 0; c < 3; ++c) img.at(c, y, x) = v;
    }
  const Image out = equalize(img);
  // Quartiles of a uniform luma sit near 0.25, 0.5, 0.75.
  std::vector<float> luma;
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x)
      luma.push_back(0.299f * out.at(0, y, x) + 0.587f * out.at(1, y, x) + 0.114f * out.at(2, y, x));
  std::sort(luma.begin(), luma.end());
  EXPECT_NEAR(luma[luma.size() / 4], 0.25, 0.05);
  EXPECT_NEAR(luma[luma.size() / 2], 0.5, 0.05);
  EXPECT_NEAR(luma[3 * luma.size() / 4], 0.75, 0.05);
}

TEST(Clahe, RaisesLocalContrastWithinBounds) {
  std::mt19937 rng(5);
  Image img(64, 64);
  std::uniform_real_distribution<float> u(0.45f, 0.55f);
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x)
      for (int c = 0; c < 3; ++c) img.at(c, y, x) = u(rng);
  const Image out = clahe(img, 2.0, 8);
  double var_in = 0, var_out = 0;
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x) {
      var_in += std::pow(img.at(1, y, x) - 0.5, 2);
      var_out += std::pow(out.at(1, y, x) - 0.5, 2);
    }
  EXPECT_GT(var_out, var_in);
  test::expect_in_unit_interval(out.tensor());
  // A constant image stays constant.
  const Image flat = clahe(Image(64, 64, 0.3f), 2.0, 8);
  for (std::size_t i = 1; i < flat.tensor().size(); ++i) ASSERT_EQ(flat.tensor()[i], flat.tensor()[0]);
}

TEST(DarkChannel, MatchesBruteForce) {
  std::mt19937 rng(6);
  for (int t = 0; t < 5; ++t) {
    const Image img = test::random_image(16, 16, rng);
    const auto dark = dark_channel(img, 15);
    const auto ref = oracle::dark_channel(img, 15);
    for (std::size_t i = 0; i < ref.size(); ++i) ASSERT_EQ(static_cast<double>(dark[i]), ref[i]);
    const auto small = dark_channel(img, 3);
    const auto ref3 = oracle::dark_channel(img, 3);
    for (std::size_t i = 0; i < ref3.size(); ++i) ASSERT_EQ(static_cast<double>(small[i]), ref3[i]);
  }
}

TEST(DarkChannel, PriorsSelectPlanes) {
  Image img(16, 16);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) img.at(0, y, x) = 0.1f, img.at(1, y, x) = 0.6f, img.at(2, y, x) = 0.8f;
  EXPECT_FLOAT_EQ(dark_channel(img, 3, Prior::Rgb)[0], 0.1f);
  EXPECT_FLOAT_EQ(dark_channel(img, 3, Prior::GreenBlue)[0], 0.6f);
  EXPECT_FLOAT_EQ(dark_channel(img, 3, Prior::RedInverted)[0], 0.6f);
}

TEST(Dehaze, WhiteImageUsesTransmissionFloor) {
  const auto r = dehaze(Image(16, 16, 1.0f), Prior::Rgb);
  for (std::size_t i = 0; i < r.dark.size(); ++i) ASSERT_EQ(r.dark[i], 1.0f);
  for (std::size_t i = 0; i < r.transmission.size(); ++i) ASSERT_NEAR(r.transmission[i], 0.1f, 1e-6);
  test::expect_in_unit_interval(r.output.tensor());
}

TEST(Dehaze, TransmissionWithinBounds) {
  std::mt19937 rng(7);
  const Image img = underwater(32, 32, rng);
  for (Prior p : {Prior::Rgb, Prior::GreenBlue, Prior::RedInverted}) {
    const auto r = dehaze(img, p);
    for (std::size_t i = 0; i < r.transmission.size(); ++i) {
      ASSERT_GE(r.transmission[i], 0.1f - 1e-6f);
      ASSERT_LE(r.transmission[i], 1.0f);
    }
    for (double a : r.airlight) {
      EXPECT_GE(a, 0.0);
      EXPECT_LE(a, 1.0);
    }
    test::expect_in_unit_interval(r.output.tensor());
  }
}
