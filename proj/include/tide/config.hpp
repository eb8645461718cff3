#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "tide/simulate.hpp"
#include "tide/training.hpp"

namespace tide {

/// Parsed run configuration. The file is flat sectioned key=value text:
///
///   [model]    preset (toy|full), n_down, base_channels, max_channels,
///              deg_base_channels, bottleneck_blocks, detail_blocks,
///              negative_slope, fusion_hidden, residual_base_channels,
///              refine_channels, gate_hidden, refine_fusion_hidden
///   [train]    lr, weight_decay, epochs, batch, cycle_epochs, clip_norm,
///              lr_min, seed, max_steps, deterministic
///   [loss]     l1, ssim, perceptual, diversity, consistency, aux, magnitude,
///              improve, base_combined, refine_combined, epsilon
///   [data]     input, target, output
///   [simulate] beta_r, beta_g, beta_b, depth (linear|smooth),
///              depth_perturbation, ambient_r, ambient_g, ambient_b, scatter,
///              blur_sigma_min, blur_sigma_max, noise_std, snow_density, seed
///
/// Unknown sections or keys are rejected; absent keys keep their defaults.
/// [train] keys override the defaults of whichever phase is being run.
struct RunConfig {
  ModelConfig model;
  LossWeights loss;
  sim::DegradeParams simulate;
  std::filesystem::path input, target, output;
  std::map<std::string, std::string> train;

  TrainConfig train_config(Phase phase) const;
};

/// Throws BadParams on syntax errors, unknown keys or bad values.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

}  // namespace tide
