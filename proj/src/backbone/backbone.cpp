#include "tide/backbone.hpp"

namespace tide {

template <typename T>
Encoder<T>::Encoder(nn::ParamStore<T>& ps, const std::string& scope, const ModelConfig& cfg) : cfg_(cfg) {
  cfg.validate();
  const double slope = cfg.negative_slope;
  stages_.emplace_back(ps, nn::join(scope, "stage0"), 3, cfg.channels_at(0), slope);
  for (int i = 1; i <= cfg.n_down; ++i) {
    stages_.emplace_back(ps, nn::join(scope, "stage" + std::to_string(i)), cfg.channels_at(i - 1), cfg.channels_at(i),
                         slope, typename nn::ConvBlock<T>::Options{.stride = 2});
  }
  for (int j = 0; j < cfg.bottleneck_blocks; ++j)
    blocks_.emplace_back(ps, nn::join(scope, "res" + std::to_string(j)), cfg.channels_at(cfg.n_down), slope);
}

template <typename T>
FeatureHierarchy<T> Encoder<T>::extract(const ag::Var<T>& img, bool bottleneck) const {
  validate_image_tensor(img.value(), cfg_.n_down);
  FeatureHierarchy<T> feats;
  feats.reserve(stages_.size());
  ag::Var<T> x = img;
  for (const auto& stage : stages_) {
    x = stage(x);
    feats.push_back(x);
  }
  if (bottleneck && !blocks_.empty()) {
    ag::Var<T> fN = feats.back();
    ag::Var<T> acc = fN;
    for (const auto& rho : blocks_) acc = acc + rho(fN);
    feats.back() = acc;
  }
  return feats;
}

template class Encoder<float>;
template class Encoder<double>;

}  // namespace tide
