#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "oracles.hpp"
#include "support.hpp"
#include "tide/error.hpp"
#include "tide/io.hpp"
#include "tide/metrics.hpp"

using namespace tide;
namespace fs = std::filesystem;

namespace {

Image gray(int h, int w, std::mt19937& rng) {
  std::uniform_real_distribution<float> u(0, 1);
  Image img(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const float v = u(rng);
      for (int c = 0; c < 3; ++c) img.at(c, y, x) = v;
    }
  return img;
}

}  // namespace

TEST(Psnr, Examples) {
  std::mt19937 rng(1);
  const Image a = test::random_image(16, 16, rng);
  EXPECT_TRUE(std::isinf(metrics::psnr(a, a)));
  Image b = a.clone();
  // MSE 0.01 from a uniform offset of 0.1 on a mid-range image.
  Image mid(16, 16, 0.5f), off(16, 16, 0.6f);
  EXPECT_NEAR(metrics::psnr(off, mid), 20.0, 1e-5);
  for (int t = 0; t < 5; ++t) {
    const Image p = test::random_image(16, 16, rng), q = test::random_image(16, 16, rng);
    EXPECT_NEAR(metrics::psnr(p, q), oracle::psnr(p, q), 1e-9);
  }
  EXPECT_THROW(metrics::psnr(a, Image(16, 24)), Error);
}

TEST(Ssim, Examples) {
  std::mt19937 rng(2);
  const Image a = test::random_image(16, 16, rng), b = test::random_image(16, 16, rng);
  EXPECT_NEAR(metrics::ssim(a, a), 1.0, 1e-6);
  EXPECT_NEAR(metrics::ssim(Image(16, 16, 0.3f), Image(16, 16, 0.3f)), 1.0, 1e-12);
  EXPECT_NEAR(metrics::ssim(a, b), oracle::ssim(test::cast<double>(a.tensor()), test::cast<double>(b.tensor())), 1e-4);
  EXPECT_EQ([&] {
    try {
      metrics::ssim(Image(8, 8), Image(8, 8));
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::BadParams;
  }(), ErrorCode::TooSmall);
}

TEST(Lab, ReferenceColours) {
  const auto white = metrics::srgb_to_lab(1, 1, 1);
  EXPECT_NEAR(white[0], 100.0, 1e-4);
  EXPECT_NEAR(white[1], 0.0, 1e-6);
  EXPECT_NEAR(white[2], 0.0, 1e-6);
  const auto red = metrics::srgb_to_lab(1, 0, 0);
  EXPECT_NEAR(red[0], 53.24, 0.01);
  EXPECT_NEAR(red[1], 80.09, 0.01);
  EXPECT_NEAR(red[2], 67.20, 0.01);
}

TEST(Uicm, Examples) {
  std::mt19937 rng(3);
  EXPECT_LT(std::abs(metrics::uicm(gray(16, 16, rng))), 1e-4);
  Image tint(16, 16);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) tint.at(0, y, x) = 0.1f, tint.at(1, y, x) = 0.5f, tint.at(2, y, x) = 0.6f;
  const auto lab = metrics::srgb_to_lab(0.1f, 0.5f, 0.6f);
  EXPECT_NEAR(metrics::uicm(tint), -0.0268 * std::hypot(lab[1], lab[2]), 1e-9);
  EXPECT_LE(metrics::uicm(tint), 0.0);
  for (int t = 0; t < 5; ++t) {
    const Image img = test::random_image(16, 16, rng);
    EXPECT_NEAR(metrics::uicm(img), oracle::uicm(img), 1e-6);
  }
}

TEST(Uicm, PixelPermutationInvariant) {
  std::mt19937 rng(4);
  const Image img = test::random_image(16, 16, rng);
  Image flipped(16, 16);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x) flipped.at(c, y, x) = img.at(c, 15 - x, y);
  EXPECT_NEAR(metrics::uicm(flipped), metrics::uicm(img), 1e-9);
}

TEST(Uiconm, Examples) {
  EXPECT_EQ(metrics::uiconm(Image(16, 16, 0.4f)), 0.0);
  Image spot(16, 16);
  for (int c = 0; c < 3; ++c) spot.at(c, 8, 8) = 1.0f;
  EXPECT_NEAR(metrics::uiconm(spot), oracle::uiconm(spot), 1e-12);
  std::mt19937 rng(5);
  const Image img = test::random_image(16, 16, rng);
  Image half = img.clone();
  for (std::size_t i = 0; i < half.tensor().size(); ++i) half.tensor()[i] = 0.5f * img.tensor()[i];
  EXPECT_NEAR(metrics::uiconm(half), 0.5 * metrics::uiconm(img), 1e-7);
  EXPECT_NEAR(metrics::uiconm(img), oracle::uiconm(img), 1e-6);
}

TEST(Uism, Examples) {
  EXPECT_EQ(metrics::uism(Image(16, 16, 0.7f)), 0.0);
  Image step(16, 16);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 16; ++y)
      for (int x = 5; x < 16; ++x) step.at(c, y, x) = 1.0f;
  EXPECT_GT(metrics::uism(step), 0.0);
  std::mt19937 rng(6);
  for (int t = 0; t < 5; ++t) {
    const Image img = test::random_image(16, 24, rng);
    EXPECT_NEAR(metrics::uism(img), oracle::uism(img), 1e-6);
  }
}

TEST(Uiqm, Examples) {
  EXPECT_EQ(metrics::uiqm(Image(16, 16, 0.5f)), 0.0);
  EXPECT_NEAR(metrics::uiqm_from(1, 1, 1), 3.8988, 1e-12);
  std::mt19937 rng(7);
  const Image img = test::random_image(16, 16, rng);
  EXPECT_NEAR(metrics::uiqm(img),
              0.0282 * metrics::uicm(img) + 0.2953 * metrics::uism(img) + 3.5753 * metrics::uiconm(img), 1e-9);
}

TEST(MetricNames, UnsupportedRejected) {
  EXPECT_NO_THROW(metrics::check_metric_names({"psnr", "ssim", "uicm", "uiconm", "uism", "uiqm"}));
  for (const char* bad : {"lpips", "brisque", "niqe"})
    EXPECT_THROW(metrics::check_metric_names({"psnr", bad}), Error) << bad;
}

TEST(Report, MeansAndCsv) {
  std::mt19937 rng(8);
  const std::vector<Image> preds{test::random_image(16, 16, rng), test::random_image(16, 16, rng)};
  const std::vector<Image> refs{test::random_image(16, 16, rng), preds[1].clone()};
  const auto r = metrics::evaluate(preds, refs, {"a.png", "b.png"}, {"psnr", "uicm"});
  ASSERT_EQ(r.values.size(), 2u);
  const auto m = r.means();
  EXPECT_NEAR(m[1], (r.values[0][1] + r.values[1][1]) / 2, 1e-15);
  EXPECT_TRUE(std::isinf(r.values[1][0]));
  const std::string csv = r.csv();
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "image,psnr,uicm");
  EXPECT_NE(csv.find("b.png,inf,"), std::string::npos);
  EXPECT_NE(csv.find("\nMEAN,inf,"), std::string::npos);
  char row[64];
  std::snprintf(row, sizeof(row), "a.png,%.6f,", r.values[0][0]);
  EXPECT_NE(csv.find(row), std::string::npos);
}

TEST(Report, DirectoryPairing) {
  const fs::path root = fs::temp_directory_path() / "tide_test_metrics";
  fs::remove_all(root);
  fs::create_directories(root / "pred");
  fs::create_directories(root / "ref");
  std::mt19937 rng(9);
  for (const char* n : {"a.png", "b.png"}) {
    const Image img = test::random_image(16, 16, rng);
    io::write_png(root / "pred" / n, img);
    io::write_png(root / "ref" / n, img);
  }
  const auto same = metrics::evaluate_pairs(root / "pred", root / "pred", {"psnr", "ssim"});
  ASSERT_EQ(same.images, (std::vector<std::string>{"a.png", "b.png"}));
  for (const auto& row : same.values) {
    EXPECT_TRUE(std::isinf(row[0]));
    EXPECT_NEAR(row[1], 1.0, 1e-6);
  }
  fs::remove(root / "ref" / "b.png");
  try {
    metrics::evaluate_pairs(root / "pred", root / "ref", {"psnr"});
    ADD_FAILURE() << "missing pair accepted";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingPair);
    EXPECT_NE(std::string(e.what()).find("b.png"), std::string::npos);
  }
  fs::remove_all(root);
}
