#include "tide/core.hpp"

#include <algorithm>
#include <cmath>

namespace tide {

std::string_view to_string(DegradationKind k) {
  switch (k) {
    case DegradationKind::Color: return "color";
    case DegradationKind::Contrast: return "contrast";
    case DegradationKind::Detail: return "detail";
    case DegradationKind::Noise: return "noise";
  }
  return "unknown";
}

ModelConfig ModelConfig::toy() { return ModelConfig{}; }

ModelConfig ModelConfig::full() {
  ModelConfig c;
  c.n_down = 5;
  c.base_channels = 64;
  c.max_channels = 512;
  c.deg_base_channels = 32;
  c.refine_channels = 64;
  return c;
}

int ModelConfig::channels_at(int level) const {
  long long c = static_cast<long long>(base_channels) << level;
  return static_cast<int>(std::min<long long>(c, max_channels));
}

void ModelConfig::validate() const {
  if (n_down < 1) throw Error(ErrorCode::BadParams, "n_down must be >= 1");
  if (base_channels < 4) throw Error(ErrorCode::BadParams, "base_channels must be >= 4");
  if (max_channels < base_channels) throw Error(ErrorCode::BadParams, "max_channels below base_channels");
  if (k_types != kDegradationTypes) throw Error(ErrorCode::BadParams, "k_types must be 4");
  if (deg_base_channels < 1 || bottleneck_blocks < 0 || detail_blocks < 1)
    throw Error(ErrorCode::BadParams, "invalid block counts");
  if (fusion_hidden < 1 || residual_base_channels < 1 || refine_channels < 4 || gate_hidden < 1 ||
      refine_fusion_hidden < 1)
    throw Error(ErrorCode::BadParams, "invalid head widths");
  if (!(negative_slope >= 0.0 && negative_slope < 1.0))
    throw Error(ErrorCode::BadParams, "negative_slope must lie in [0,1)");
}

Image::Image(Tensor<float> t) : t_(std::move(t)) {
  if (t_.n() != 1 || t_.c() != 3) throw Error(ErrorCode::BadShape, "image must be 1x3xHxW, got " + t_.shape().str());
}

template <typename T>
void validate_image_tensor(const Tensor<T>& t, int n_down) {
  if (t.c() != 3) throw Error(ErrorCode::BadShape, "image must have 3 channels, got " + t.shape().str());
  const int div = 1 << n_down;
  if (t.h() < 8 || t.w() < 8 || t.h() % div != 0 || t.w() % div != 0)
    throw Error(ErrorCode::BadShape,
                "image " + t.shape().str() + " must be at least 8x8 and divisible by " + std::to_string(div));
  for (std::size_t i = 0; i < t.size(); ++i) {
    const T v = t[i];
    if (!(v >= T(0) && v <= T(1)))
      throw Error(ErrorCode::OutOfRange, "element " + std::to_string(i) + " = " + std::to_string(v) + " outside [0,1]");
  }
}

const Image& validate_image(const Image& img, int n_down) {
  validate_image_tensor(img.tensor(), n_down);
  return img;
}

template <typename T>
Tensor<T> clamp01(const Tensor<T>& t) {
  Tensor<T> out(t.shape());
  std::transform(t.data(), t.data() + t.size(), out.data(), [](T v) { return std::min(std::max(v, T(0)), T(1)); });
  return out;
}

Image clamp01(const Image& img) { return Image(clamp01(img.tensor())); }

Tensor<float> batch_images(std::span<const Image> images) {
  std::vector<Tensor<float>> ts;
  ts.reserve(images.size());
  for (const auto& im : images) ts.push_back(im.tensor());
  return stack<float>(ts);
}

Image image_from_batch(const Tensor<float>& batch, int index) {
  if (batch.c() != 3) throw Error(ErrorCode::BadShape, "batch is not RGB: " + batch.shape().str());
  return Image(batch.sample(index));
}

template void validate_image_tensor(const Tensor<float>&, int);
template void validate_image_tensor(const Tensor<double>&, int);
template Tensor<float> clamp01(const Tensor<float>&);
template Tensor<double> clamp01(const Tensor<double>&);

}  // namespace tide
