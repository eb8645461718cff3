#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "support.hpp"
#include "tide/error.hpp"
#include "tide/io.hpp"
#include "tide/simulate.hpp"

using namespace tide;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

double map_mean(const Tensor<float>& maps, int k) {
  const std::size_t plane = maps.size() / 4;
  double s = 0;
  for (std::size_t i = 0; i < plane; ++i) s += maps[k * plane + i];
  return s / plane;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST(Degrade, IdentityParamsLeaveImageUntouched) {
  const Image clean = sim::procedural_image(32, 32, 4);
  const auto out = sim::degrade(clean, sim::DegradeParams::identity());
  for (std::size_t i = 0; i < clean.tensor().size(); ++i) ASSERT_EQ(out.degraded.tensor()[i], clean.tensor()[i]);
  for (std::size_t i = 0; i < out.maps.size(); ++i) ASSERT_EQ(out.maps[i], 0.0f);
}

TEST(Degrade, HeavyScatterConvergesToAmbient) {
  sim::DegradeParams p;
  p.scatter = 60;
  p.depth_perturbation = 0;
  p.blur_sigma_max = 0;
  p.noise_std = 0;
  p.snow_density = 0;
  p.ambient = {0.3, 0.6, 0.7};
  const auto out = sim::degrade(sim::procedural_image(32, 32, 5), p);
  for (int y = 16; y < 32; ++y)
    for (int x = 0; x < 32; ++x)
      for (int c = 0; c < 3; ++c) ASSERT_NEAR(out.degraded.at(c, y, x), p.ambient[c], 1.0 / 255);
}

TEST(Degrade, DeterministicAndBounded) {
  const Image clean = sim::procedural_image(32, 32, 6);
  const sim::DegradeParams p;
  const auto a = sim::degrade(clean, p);
  const auto b = sim::degrade(clean, p);
  for (std::size_t i = 0; i < a.degraded.tensor().size(); ++i) ASSERT_EQ(a.degraded.tensor()[i], b.degraded.tensor()[i]);
  for (std::size_t i = 0; i < a.maps.size(); ++i) ASSERT_EQ(a.maps[i], b.maps[i]);
  test::expect_in_unit_interval(a.degraded.tensor());
  test::expect_in_unit_interval(a.maps);
  EXPECT_EQ(a.maps.shape(), (Shape{1, 4, 32, 32}));
  auto q = p;
  q.seed = 2;
  const auto c = sim::degrade(clean, q);
  double diff = 0;
  for (std::size_t i = 0; i < a.degraded.tensor().size(); ++i) diff += std::abs(a.degraded.tensor()[i] - c.degraded.tensor()[i]);
  EXPECT_GT(diff, 0.0);
}

TEST(Degrade, StrongerRedAttenuationRaisesColourMap) {
  const Image clean = sim::procedural_image(32, 32, 7);
  sim::DegradeParams p;
  double prev = -1;
  for (double r : {0.7, 1.4, 2.8}) {
    p.beta[0] = r;
    const double m = map_mean(sim::degrade(clean, p).maps, 0);
    EXPECT_GT(m, prev);
    prev = m;
  }
}

TEST(Degrade, ParamValidation) {
  const Image clean = sim::procedural_image(16, 16, 8);
  auto bad = [&](auto mutate) {
    sim::DegradeParams p;
    mutate(p);
    try {
      sim::degrade(clean, p);
    } catch (const Error& e) {
      return e.code() == ErrorCode::BadParams;
    }
    return false;
  };
  EXPECT_TRUE(bad([](auto& p) { p.beta = {0.3, 0.6, 1.4}; }));
  EXPECT_TRUE(bad([](auto& p) { p.beta = {1.0, 1.0, 0.5}; }));
  EXPECT_TRUE(bad([](auto& p) { p.blur_sigma_max = 5; }));
  EXPECT_TRUE(bad([](auto& p) { p.noise_std = 0.5; }));
  EXPECT_TRUE(bad([](auto& p) { p.scatter = -1; }));
}

TEST(MakePairs, SizesAndSeeds) {
  const auto pairs = sim::make_pairs(3, 32, sim::DegradeParams{});
  ASSERT_EQ(pairs.size(), 3u);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    EXPECT_EQ(pairs[i].seed, 1 + i);
    EXPECT_EQ(pairs[i].clean.h(), 32);
    EXPECT_EQ(pairs[i].out.degraded.w(), 32);
  }
  EXPECT_THROW(sim::make_pairs(2, 63, sim::DegradeParams{}, 3), Error);
  EXPECT_NO_THROW(sim::make_pairs(1, 36, sim::DegradeParams{}, 2));
}

TEST(MakeDataset, FilesAndReproducibility) {
  TempDir a("tide_test_sim_a"), b("tide_test_sim_b");
  const auto m = sim::make_dataset(8, 64, a.path, sim::DegradeParams{});
  ASSERT_EQ(m.names.size(), 8u);
  for (const char* sub : {"clean", "degraded", "maps"})
    EXPECT_EQ(io::list_images(a.path / sub).size(), 8u) << sub;
  EXPECT_TRUE(fs::exists(a.path / "manifest.json"));
  sim::make_dataset(8, 64, b.path, sim::DegradeParams{});
  for (const char* sub : {"clean", "degraded", "maps"})
    for (const auto& n : m.names) EXPECT_EQ(slurp(a.path / sub / n), slurp(b.path / sub / n)) << sub << "/" << n;
  EXPECT_EQ(slurp(a.path / "manifest.json"), slurp(b.path / "manifest.json"));

  const auto pairs = sim::make_pairs(8, 64, sim::DegradeParams{});
  const auto maps = io::read_maps_png16(a.path / "maps" / m.names[3]);
  for (std::size_t i = 0; i < maps.size(); ++i) ASSERT_NEAR(maps[i], pairs[3].out.maps[i], 0.5 / 65535 + 1e-7);
}

TEST(Png, RoundTripAndErrors) {
  TempDir d("tide_test_png");
  std::mt19937 rng(9);
  const Image img = test::random_image(12, 20, rng);
  io::write_png(d.path / "x.png", img);
  const Image back = io::read_png(d.path / "x.png");
  ASSERT_EQ(back.h(), 12);
  ASSERT_EQ(back.w(), 20);
  for (std::size_t i = 0; i < img.tensor().size(); ++i) ASSERT_NEAR(back.tensor()[i], img.tensor()[i], 0.5 / 255 + 1e-6);
  io::write_png(d.path / "y.png", back);
  const Image again = io::read_png(d.path / "y.png");
  for (std::size_t i = 0; i < img.tensor().size(); ++i) ASSERT_EQ(again.tensor()[i], back.tensor()[i]);

  std::ofstream(d.path / "junk.png") << "not an image";
  try {
    io::read_png(d.path / "junk.png");
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnreadableImage);
  }
  const auto listed = io::list_images(d.path);
  ASSERT_EQ(listed.size(), 3u);
  EXPECT_EQ(listed[0].filename(), "junk.png");
  EXPECT_EQ(listed[2].filename(), "y.png");
  EXPECT_THROW(io::list_images(d.path / "missing"), Error);
}

TEST(Png, CropAndResize) {
  std::mt19937 rng(10);
  const Image img = test::random_image(35, 42, rng);
  set_warnings_quiet(true);
  const Image c = io::center_crop_valid(img, 3);
  set_warnings_quiet(false);
  EXPECT_EQ(c.h(), 32);
  EXPECT_EQ(c.w(), 40);
  EXPECT_EQ(c.at(1, 0, 0), img.at(1, 1, 1));
  EXPECT_THROW(io::center_crop_valid(test::random_image(6, 40, rng), 3), Error);
  const Image flat = io::resize_bilinear(Image(10, 10, 0.25f), 16, 24);
  EXPECT_EQ(flat.h(), 16);
  for (std::size_t i = 0; i < flat.tensor().size(); ++i) ASSERT_NEAR(flat.tensor()[i], 0.25f, 1e-7);
}
