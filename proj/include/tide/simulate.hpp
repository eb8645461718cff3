#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tide/core.hpp"

namespace tide::sim {

enum class DepthField { Linear, Smooth };

/// Physical knobs of the synthetic water column. Depth is normalized to
/// [0,1] (0 at the top row for the linear field).
struct DegradeParams {
  std::array<double, 3> beta{1.4, 0.6, 0.3};  // per-channel attenuation, R > G > B
  DepthField depth = DepthField::Linear;
  double depth_perturbation = 0.2;  // amplitude of the smooth field added to the linear ramp
  std::array<double, 3> ambient{0.10, 0.45, 0.55};
  double scatter = 1.2;  // beta_s
  double blur_sigma_min = 0.0;
  double blur_sigma_max = 1.5;
  double noise_std = 0.03;
  double snow_density = 0.002;
  std::uint64_t seed = 1;

  /// All coefficients zero: degrade() returns the clean image unchanged.
  static DegradeParams identity();
  void validate() const;
};

// Fixed scales that bring the ground-truth maps into [0,1].
inline constexpr double kMaxBlurSigma = 3.0;
inline constexpr double kMaxNoiseStd = 0.1;

struct Degraded {
  Image degraded;
  Tensor<float> maps;  // 1x4xHxW: color, contrast, detail, noise
  Tensor<float> depth;  // 1x1xHxW
};

/// degraded = clamp01(blur_sigma(d)(clean * exp(-beta_c d)) * t + A (1 - t) + noise),
/// t = exp(-beta_s d). Throws BadParams.
Degraded degrade(const Image& clean, const DegradeParams& p);

/// Smooth field in [0,1] built from a few random low-frequency cosines.
Tensor<float> smooth_field(int h, int w, std::uint64_t seed);
Tensor<float> depth_field(int h, int w, const DegradeParams& p);

/// Procedural scene: gradient background, flat and textured shapes.
Image procedural_image(int h, int w, std::uint64_t seed);

struct Pair {
  Image clean;
  Degraded out;
  std::uint64_t seed = 0;
};

/// Deterministic in-memory set; pair i uses seed p.seed + i for both the
/// scene and the water column.
std::vector<Pair> make_pairs(int n, int size, const DegradeParams& p, int n_down = 3);

struct Manifest {
  std::filesystem::path root;
  std::vector<std::string> names;
  std::vector<std::uint64_t> seeds;
};

/// Writes clean/, degraded/ and maps/ (16-bit RGBA) PNGs plus manifest.json
/// under out_dir. Throws BadParams or IOFailure.
Manifest make_dataset(int n, int size, const std::filesystem::path& out_dir, const DegradeParams& p, int n_down = 3);

std::string params_json(const DegradeParams& p);

}  // namespace tide::sim
