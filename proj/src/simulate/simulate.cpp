#include "tide/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include <json.hpp>

#include "tide/error.hpp"
#include "tide/io.hpp"

namespace tide::sim {

namespace {

constexpr double kPi = 3.14159265358979323846;

double rand01(std::mt19937_64& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

// Spatially varying Gaussian blur, gathering with each output pixel's own
// sigma. Borders replicate.
Tensor<double> variable_blur(const Tensor<double>& x, const Tensor<double>& sigma) {
  Tensor<double> out = x.clone();
  const int h = x.h(), w = x.w();
  for (int y = 0; y < h; ++y)
    for (int xx = 0; xx < w; ++xx) {
      const double s = sigma.at(0, 0, y, xx);
      if (s < 1e-6) continue;
      const int r = static_cast<int>(std::ceil(3.0 * s));
      double acc[3] = {0, 0, 0}, norm = 0;
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
          const double g = std::exp(-(dx * dx + dy * dy) / (2 * s * s));
          const int sy = std::clamp(y + dy, 0, h - 1), sx = std::clamp(xx + dx, 0, w - 1);
          for (int c = 0; c < 3; ++c) acc[c] += g * x.at(0, c, sy, sx);
          norm += g;
        }
      for (int c = 0; c < 3; ++c) out.at(0, c, y, xx) = acc[c] / norm;
    }
  return out;
}

std::array<double, 3> random_color(std::mt19937_64& rng) {
  return {0.05 + 0.9 * rand01(rng), 0.05 + 0.9 * rand01(rng), 0.05 + 0.9 * rand01(rng)};
}

}  // namespace

DegradeParams DegradeParams::identity() {
  DegradeParams p;
  p.beta = {0, 0, 0};
  p.depth_perturbation = 0;
  p.ambient = {0, 0, 0};
  p.scatter = 0;
  p.blur_sigma_min = p.blur_sigma_max = 0;
  p.noise_std = 0;
  p.snow_density = 0;
  return p;
}

void DegradeParams::validate() const {
  const bool all_zero = beta[0] == 0 && beta[1] == 0 && beta[2] == 0;
  if (!all_zero && !(beta[0] > beta[1] && beta[1] > beta[2] && beta[2] > 0))
    throw Error(ErrorCode::BadParams, "attenuation must satisfy beta_R > beta_G > beta_B > 0 (or all zero)");
  for (double a : ambient)
    if (!(a >= 0 && a <= 1)) throw Error(ErrorCode::BadParams, "ambient light must lie in [0,1]");
  if (!(scatter >= 0)) throw Error(ErrorCode::BadParams, "scatter coefficient must be nonnegative");
  if (!(blur_sigma_min >= 0 && blur_sigma_min <= blur_sigma_max && blur_sigma_max <= kMaxBlurSigma))
    throw Error(ErrorCode::BadParams, "blur sigma range must satisfy 0 <= min <= max <= 3");
  if (!(noise_std >= 0 && noise_std <= kMaxNoiseStd)) throw Error(ErrorCode::BadParams, "noise std must lie in [0, 0.1]");
  if (!(snow_density >= 0 && snow_density <= 1)) throw Error(ErrorCode::BadParams, "snow density must lie in [0,1]");
  if (!(depth_perturbation >= 0 && depth_perturbation <= 1))
    throw Error(ErrorCode::BadParams, "depth perturbation must lie in [0,1]");
}

Tensor<float> smooth_field(int h, int w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  constexpr int kWaves = 4;
  double fy[kWaves], fx[kWaves], ph[kWaves], amp[kWaves];
  for (int i = 0; i < kWaves; ++i) {
    fy[i] = 0.5 + 1.5 * rand01(rng);
    fx[i] = 0.5 + 1.5 * rand01(rng);
    ph[i] = 2 * kPi * rand01(rng);
    amp[i] = 0.5 + rand01(rng);
  }
  Tensor<double> f(Shape{1, 1, h, w});
  double lo = 1e300, hi = -1e300;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double v = 0;
      for (int i = 0; i < kWaves; ++i)
        v += amp[i] * std::cos(2 * kPi * (fy[i] * y / h + fx[i] * x / w) + ph[i]);
      f.at(0, 0, y, x) = v;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  Tensor<float> out(Shape{1, 1, h, w});
  const double span = hi - lo > 1e-12 ? hi - lo : 1.0;
  for (std::size_t i = 0; i < f.size(); ++i) out[i] = static_cast<float>((f[i] - lo) / span);
  return out;
}

Tensor<float> depth_field(int h, int w, const DegradeParams& p) {
  if (p.depth == DepthField::Smooth) return smooth_field(h, w, p.seed ^ 0xD3E7ull);
  Tensor<float> d(Shape{1, 1, h, w});
  const Tensor<float> s = smooth_field(h, w, p.seed ^ 0xD3E7ull);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double ramp = h > 1 ? static_cast<double>(y) / (h - 1) : 0.0;
      d.at(0, 0, y, x) =
          static_cast<float>(std::clamp(ramp + p.depth_perturbation * (s.at(0, 0, y, x) - 0.5), 0.0, 1.0));
    }
  return d;
}

Degraded degrade(const Image& clean, const DegradeParams& p) {
  p.validate();
  const int h = clean.h(), w = clean.w();
  if (h < 1 || w < 1) throw Error(ErrorCode::BadParams, "empty image");
  std::mt19937_64 rng(p.seed * 0x9E3779B97F4A7C15ull + 17);
  Degraded out;
  out.depth = depth_field(h, w, p);
  out.maps = Tensor<float>(Shape{1, 4, h, w});
  const Tensor<float> noise_shape = smooth_field(h, w, p.seed ^ 0x5A17ull);

  Tensor<double> signal(Shape{1, 3, h, w});
  Tensor<double> sigma(Shape{1, 1, h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double d = out.depth.at(0, 0, y, x);
      double cast = 0;
      for (int c = 0; c < 3; ++c) {
        const double att = std::exp(-p.beta[c] * d);
        signal.at(0, c, y, x) = clean.at(c, y, x) * att;
        cast += (1 - att) * (1 - att);
      }
      sigma.at(0, 0, y, x) = p.blur_sigma_min + (p.blur_sigma_max - p.blur_sigma_min) * d;
      out.maps.at(0, 0, y, x) = static_cast<float>(std::sqrt(cast / 3.0));
      out.maps.at(0, 2, y, x) = static_cast<float>(std::min(1.0, sigma.at(0, 0, y, x) / kMaxBlurSigma));
    }
  const Tensor<double> blurred = variable_blur(signal, sigma);

  Tensor<double> hazy(Shape{1, 3, h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double t = std::exp(-p.scatter * out.depth.at(0, 0, y, x));
      out.maps.at(0, 1, y, x) = static_cast<float>(1 - t);
      for (int c = 0; c < 3; ++c) hazy.at(0, c, y, x) = blurred.at(0, c, y, x) * t + p.ambient[c] * (1 - t);
    }

  // Marine snow: sparse bright specks with a small Gaussian falloff.
  Tensor<double> snow(Shape{1, 1, h, w});
  const long specks = std::lround(p.snow_density * h * w);
  for (long i = 0; i < specks; ++i) {
    const int cy = static_cast<int>(rand01(rng) * h), cx = static_cast<int>(rand01(rng) * w);
    const double strength = 0.5 + 0.5 * rand01(rng);
    for (int dy = -2; dy <= 2; ++dy)
      for (int dx = -2; dx <= 2; ++dx) {
        const int y = cy + dy, x = cx + dx;
        if (y < 0 || y >= h || x < 0 || x >= w) continue;
        const double g = strength * std::exp(-(dx * dx + dy * dy) / (2 * 0.8 * 0.8));
        snow.at(0, 0, y, x) = std::max(snow.at(0, 0, y, x), g);
      }
  }

  std::normal_distribution<double> gauss(0.0, 1.0);
  out.degraded = Image(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double std_here = p.noise_std * (0.3 + 0.7 * noise_shape.at(0, 0, y, x));
      const double s = snow.at(0, 0, y, x);
      for (int c = 0; c < 3; ++c) {
        double v = hazy.at(0, c, y, x);
        if (s > 0) v += (1 - v) * s;
        if (std_here > 0) v += std_here * gauss(rng);
        out.degraded.at(c, y, x) = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
      out.maps.at(0, 3, y, x) = static_cast<float>(std::max(std::min(1.0, std_here / kMaxNoiseStd), s));
    }
  return out;
}

Image procedural_image(int h, int w, std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0xC1EA11ull);
  Image img(h, w);
  const auto c0 = random_color(rng), c1 = random_color(rng);
  const double angle = 2 * kPi * rand01(rng);
  const double ux = std::cos(angle), uy = std::sin(angle);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double s = 0.5 + 0.5 * ((x / double(w) - 0.5) * ux + (y / double(h) - 0.5) * uy) * 1.4;
      const double a = std::clamp(s, 0.0, 1.0);
      for (int c = 0; c < 3; ++c) img.at(c, y, x) = static_cast<float>(c0[c] * (1 - a) + c1[c] * a);
    }
  const int shapes = 4 + static_cast<int>(rand01(rng) * 4);
  for (int i = 0; i < shapes; ++i) {
    const int kind = static_cast<int>(rand01(rng) * 3);  // 0 ellipse, 1 rectangle, 2 textured ellipse
    const auto col = random_color(rng), col2 = random_color(rng);
    const double cy = rand01(rng) * h, cx = rand01(rng) * w;
    const double ry = (0.08 + 0.22 * rand01(rng)) * h, rx = (0.08 + 0.22 * rand01(rng)) * w;
    const double freq = 0.15 + 0.5 * rand01(rng), tex_angle = kPi * rand01(rng);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double ny = (y - cy) / ry, nx = (x - cx) / rx;
        const bool inside = kind == 1 ? (std::abs(ny) <= 1 && std::abs(nx) <= 1) : (ny * ny + nx * nx <= 1);
        if (!inside) continue;
        double a = 0;
        if (kind == 2) a = 0.5 + 0.5 * std::sin(freq * (x * std::cos(tex_angle) + y * std::sin(tex_angle)) * 2 * kPi / 4);
        for (int c = 0; c < 3; ++c) img.at(c, y, x) = static_cast<float>(col[c] * (1 - a) + col2[c] * a);
      }
  }
  return img;
}

std::vector<Pair> make_pairs(int n, int size, const DegradeParams& p, int n_down) {
  if (n < 1) throw Error(ErrorCode::BadParams, "count must be at least 1");
  const int div = 1 << n_down;
  if (size < std::max(8, div) || size % div != 0)
    throw Error(ErrorCode::BadParams,
                "size " + std::to_string(size) + " is not a positive multiple of " + std::to_string(div));
  p.validate();
  std::vector<Pair> out;
  for (int i = 0; i < n; ++i) {
    Pair pr;
    pr.seed = p.seed + static_cast<std::uint64_t>(i);
    pr.clean = procedural_image(size, size, pr.seed);
    DegradeParams q = p;
    q.seed = pr.seed;
    pr.out = degrade(pr.clean, q);
    out.push_back(std::move(pr));
  }
  return out;
}

std::string params_json(const DegradeParams& p) {
  nlohmann::ordered_json j;
  j["beta"] = p.beta;
  j["depth"] = p.depth == DepthField::Linear ? "linear" : "smooth";
  j["depth_perturbation"] = p.depth_perturbation;
  j["ambient"] = p.ambient;
  j["scatter"] = p.scatter;
  j["blur_sigma"] = {p.blur_sigma_min, p.blur_sigma_max};
  j["noise_std"] = p.noise_std;
  j["snow_density"] = p.snow_density;
  j["seed"] = p.seed;
  return j.dump();
}

Manifest make_dataset(int n, int size, const std::filesystem::path& out_dir, const DegradeParams& p, int n_down) {
  const auto pairs = make_pairs(n, size, p, n_down);
  namespace fs = std::filesystem;
  std::error_code ec;
  for (const char* sub : {"clean", "degraded", "maps"}) {
    fs::create_directories(out_dir / sub, ec);
    if (ec) throw Error(ErrorCode::IOFailure, "cannot create " + (out_dir / sub).string() + ": " + ec.message());
  }
  Manifest m;
  m.root = out_dir;
  nlohmann::ordered_json j;
  j["count"] = n;
  j["size"] = size;
  j["params"] = nlohmann::ordered_json::parse(params_json(p));
  j["map_channels"] = {"color", "contrast", "detail", "noise"};
  j["pairs"] = nlohmann::ordered_json::array();
  for (int i = 0; i < n; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "%04d.png", i);
    io::write_png(out_dir / "clean" / name, pairs[i].clean);
    io::write_png(out_dir / "degraded" / name, pairs[i].out.degraded);
    io::write_maps_png16(out_dir / "maps" / name, pairs[i].out.maps);
    m.names.emplace_back(name);
    m.seeds.push_back(pairs[i].seed);
    j["pairs"].push_back({{"name", name}, {"seed", pairs[i].seed}});
  }
  std::ofstream f(out_dir / "manifest.json", std::ios::binary);
  if (!f) throw Error(ErrorCode::IOFailure, "cannot write " + (out_dir / "manifest.json").string());
  f << j.dump(2) << '\n';
  return m;
}

}  // namespace tide::sim
