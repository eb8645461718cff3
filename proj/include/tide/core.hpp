#pragma once

#include <array>
#include <string_view>

#include "tide/tensor.hpp"

namespace tide {

inline constexpr int kDegradationTypes = 4;

/// The four degradation kinds. The order is shared by degradation maps,
/// decoders, residual maps and refinement experts.
enum class DegradationKind { Color = 0, Contrast = 1, Detail = 2, Noise = 3 };

inline constexpr std::array<DegradationKind, kDegradationTypes> kAllKinds{
    DegradationKind::Color, DegradationKind::Contrast, DegradationKind::Detail, DegradationKind::Noise};

std::string_view to_string(DegradationKind k);

/// Architecture hyperparameters. Two presets exist: `toy()` for desk-scale
/// runs and `full()` for the published network size.
struct ModelConfig {
  int n_down = 3;
  int base_channels = 16;
  int max_channels = 64;
  int deg_base_channels = 8;
  int k_types = kDegradationTypes;
  int bottleneck_blocks = 2;
  int detail_blocks = 2;
  double negative_slope = 0.2;
  // Widths the published description leaves open.
  int fusion_hidden = 32;
  int residual_base_channels = 8;
  int refine_channels = 16;
  int gate_hidden = 16;
  int refine_fusion_hidden = 16;

  static ModelConfig toy();
  static ModelConfig full();

  int channels_at(int level) const;
  int divisor() const { return 1 << n_down; }
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

struct LossWeights {
  double l1 = 1.0;
  double ssim = 0.1;
  double perceptual = 0.1;
  double diversity = 0.05;
  double consistency = 0.1;
  double aux = 0.1;
  double magnitude = 0.1;
  double improve = 0.5;
  double base_combined = 0.7;
  double refine_combined = 1.0;
  double epsilon = 0.01;

  bool operator==(const LossWeights&) const = default;
};

/// 3xHxW RGB picture with values in [0,1], stored as a 1x3xHxW float tensor.
class Image {
 public:
  Image() = default;
  Image(int h, int w, float fill = 0.0f) : t_(Shape{1, 3, h, w}, fill) {}
  explicit Image(Tensor<float> t);

  int h() const { return t_.h(); }
  int w() const { return t_.w(); }
  float& at(int c, int y, int x) { return t_.at(0, c, y, x); }
  float at(int c, int y, int x) const { return t_.at(0, c, y, x); }
  const Tensor<float>& tensor() const { return t_; }
  Tensor<float>& tensor() { return t_; }
  Image clone() const { return Image(t_.clone()); }

 private:
  Tensor<float> t_{Shape{1, 3, 0, 0}};
};

/// Returns `img` when every element is in [0,1] and H, W are at least 8 and
/// divisible by 2^n_down. Throws OutOfRange or BadShape otherwise.
const Image& validate_image(const Image& img, int n_down);
/// Tensor form: accepts 3xHxW content with any batch size.
template <typename T>
void validate_image_tensor(const Tensor<T>& t, int n_down);

template <typename T>
Tensor<T> clamp01(const Tensor<T>& t);
Image clamp01(const Image& img);

/// Batch a list of equally sized images into Nx3xHxW.
Tensor<float> batch_images(std::span<const Image> images);
Image image_from_batch(const Tensor<float>& batch, int index);

}  // namespace tide
