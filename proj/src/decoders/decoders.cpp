#include "tide/decoders.hpp"

namespace tide {

int color_reduction(int channels) { return std::max(4, channels / 16); }
int denoise_groups(int channels) { return std::max(1, std::min(channels / 8, channels)); }

template <typename T>
ColorBlock<T>::ColorBlock(nn::ParamStore<T>& ps, const std::string& name, int channels)
    : gate_(ps, name, channels, std::max(1, channels / color_reduction(channels))) {}

template <typename T>
ContrastBlock<T>::ContrastBlock(nn::ParamStore<T>& ps, const std::string& name, int channels, double slope)
    : branch_(ps, name, channels, slope) {}

template <typename T>
DetailBlock<T>::DetailBlock(nn::ParamStore<T>& ps, const std::string& name, int channels, int branches,
                            double slope) {
  for (int j = 0; j < branches; ++j) branches_.emplace_back(ps, nn::join(name, "branch" + std::to_string(j)), channels, slope);
}

template <typename T>
ag::Var<T> DetailBlock<T>::operator()(const ag::Var<T>& x) const {
  ag::Var<T> acc = x;
  for (const auto& b : branches_) acc = acc + b(x);
  return acc;
}

template <typename T>
DenoiseBlock<T>::DenoiseBlock(nn::ParamStore<T>& ps, const std::string& name, int channels, double slope)
    : pre_(ps, nn::join(name, "pre"), channels, channels, slope),
      grouped_(ps, nn::join(name, "grouped"), channels, channels, 3, 1, denoise_groups(channels)),
      mix_(ps, nn::join(name, "mix"), channels, channels, 1) {}

template <typename T>
Decoder<T>::Decoder(nn::ParamStore<T>& ps, const std::string& scope, const ModelConfig& cfg, DegradationKind kind)
    : cfg_(cfg), kind_(kind) {
  const double a = cfg.negative_slope;
  for (int i = 0; i < cfg.n_down; ++i) {
    const int c = cfg.channels_at(i);
    const std::string lvl = nn::join(scope, "level" + std::to_string(i));
    calibrate_.emplace_back(ps, nn::join(lvl, "calibrate"), cfg.channels_at(i + 1) + c, c, a);
    const std::string bn = nn::join(lvl, "block");
    switch (kind) {
      case DegradationKind::Color: blocks_.push_back(std::make_shared<ColorBlock<T>>(ps, bn, c)); break;
      case DegradationKind::Contrast: blocks_.push_back(std::make_shared<ContrastBlock<T>>(ps, bn, c, a)); break;
      case DegradationKind::Detail:
        blocks_.push_back(std::make_shared<DetailBlock<T>>(ps, bn, c, cfg.detail_blocks, a));
        break;
      case DegradationKind::Noise: blocks_.push_back(std::make_shared<DenoiseBlock<T>>(ps, bn, c, a)); break;
    }
  }
  out_ = nn::Conv<T>(ps, nn::join(scope, "out"), cfg.channels_at(0), 3, 3);
}

template <typename T>
ag::Var<T> Decoder<T>::decode(const FeatureHierarchy<T>& feats) const {
  if (static_cast<int>(feats.size()) != cfg_.n_down + 1)
    throw Error(ErrorCode::ConfigMismatch, "decoder expects " + std::to_string(cfg_.n_down + 1) + " feature levels, got " +
                                               std::to_string(feats.size()));
  ag::Var<T> x = feats.back();
  for (int i = cfg_.n_down - 1; i >= 0; --i) {
    x = ag::concat(ag::upsample2x(x), feats[i]);
    x = calibrate_[i](x);
    x = (*blocks_[i])(x);
  }
  return ag::add_scalar(ag::mul_scalar(ag::tanh(out_(x)), T(0.5)), T(0.5));
}

template class ColorBlock<float>;
template class ColorBlock<double>;
template class ContrastBlock<float>;
template class ContrastBlock<double>;
template class DetailBlock<float>;
template class DetailBlock<double>;
template class DenoiseBlock<float>;
template class DenoiseBlock<double>;
template class Decoder<float>;
template class Decoder<double>;

}  // namespace tide
