#include "tide/degradation.hpp"

namespace tide {

namespace {

template <typename T>
void require_even_quarters(const Shape& s) {
  if (s.h % 4 != 0 || s.w % 4 != 0 || s.h < 4 || s.w < 4)
    throw Error(ErrorCode::BadShape, "estimator input " + s.str() + " must be divisible by 4");
}

}  // namespace

template <typename T>
DegradationEstimator<T>::DegradationEstimator(nn::ParamStore<T>& ps, const std::string& scope,
                                              const ModelConfig& cfg) {
  const int d = cfg.deg_base_channels;
  const double a = cfg.negative_slope;
  using Opt = typename nn::ConvBlock<T>::Options;
  enc0_ = nn::ConvBlock<T>(ps, nn::join(scope, "enc0"), 3, d, a);
  enc1_ = nn::ConvBlock<T>(ps, nn::join(scope, "enc1"), d, 2 * d, a, Opt{.stride = 2});
  enc2_ = nn::ConvBlock<T>(ps, nn::join(scope, "enc2"), 2 * d, 4 * d, a, Opt{.stride = 2});
  context_ = nn::ChannelGate<T>(ps, nn::join(scope, "context"), 4 * d, std::max(1, 4 * d / kGlobalContextReduction));
  merge_ = nn::ConvBlock<T>(ps, nn::join(scope, "merge"), 8 * d, 4 * d, a);
  dec1_ = nn::ConvBlock<T>(ps, nn::join(scope, "dec1"), 4 * d + 2 * d, 2 * d, a);
  dec0_ = nn::ConvBlock<T>(ps, nn::join(scope, "dec0"), 2 * d + d, d, a);
  out_ = nn::Conv<T>(ps, nn::join(scope, "out"), d, cfg.k_types, 1);
}

template <typename T>
ag::Var<T> DegradationEstimator<T>::estimate(const ag::Var<T>& img) const {
  require_even_quarters<T>(img.shape());
  const ag::Var<T> z0 = enc0_(img);
  const ag::Var<T> z1 = enc1_(z0);
  const ag::Var<T> z2 = enc2_(z1);
  const ag::Var<T> g = context_(z2);
  ag::Var<T> u = merge_(ag::concat(g, z2));
  u = dec1_(ag::concat(ag::upsample2x(u), z1));
  u = dec0_(ag::concat(ag::upsample2x(u), z0));
  return ag::sigmoid(out_(u));
}

template <typename T>
ag::Var<T> difference_map(const ag::Var<T>& img, const ag::Var<T>& initial) {
  if (!(img.shape() == initial.shape()))
    throw Error(ErrorCode::BadShape, "difference_map: " + img.shape().str() + " vs " + initial.shape().str());
  return ag::abs(img - initial);
}

template <typename T>
ResidualEstimator<T>::ResidualEstimator(nn::ParamStore<T>& ps, const std::string& scope, const ModelConfig& cfg)
    : ps_(&ps) {
  const int b = cfg.residual_base_channels;
  const double a = cfg.negative_slope;
  using Opt = typename nn::ConvBlock<T>::Options;
  enc0_ = nn::ConvBlock<T>(ps, nn::join(scope, "enc0"), 6, b, a);
  enc1_ = nn::ConvBlock<T>(ps, nn::join(scope, "enc1"), b, 2 * b, a, Opt{.stride = 2});
  enc2_ = nn::ConvBlock<T>(ps, nn::join(scope, "enc2"), 2 * b, 4 * b, a, Opt{.stride = 2});
  dec1_ = nn::ConvBlock<T>(ps, nn::join(scope, "dec1"), 4 * b + 2 * b, 2 * b, a);
  dec0_ = nn::ConvBlock<T>(ps, nn::join(scope, "dec0"), 2 * b + b, b, a);
  diff0_ = nn::ConvBlock<T>(ps, nn::join(scope, "diff0"), 3, 8, a, Opt{.norm = false});
  diff1_ = nn::Conv<T>(ps, nn::join(scope, "diff1"), 8, 1, 3);
  alpha_ = ps.add(nn::join(scope, "alpha"), Shape{1, 1, 1, 1}, nn::Init::Zero);
  out_ = nn::Conv<T>(ps, nn::join(scope, "out"), b, cfg.k_types, 1);
}

template <typename T>
ag::Var<T> ResidualEstimator<T>::features(const ag::Var<T>& img, const ag::Var<T>& initial) const {
  if (!(img.shape() == initial.shape()))
    throw Error(ErrorCode::BadShape, "residual estimator: " + img.shape().str() + " vs " + initial.shape().str());
  require_even_quarters<T>(img.shape());
  const ag::Var<T> z0 = enc0_(ag::concat(img, initial));
  const ag::Var<T> z1 = enc1_(z0);
  const ag::Var<T> z2 = enc2_(z1);
  ag::Var<T> u = dec1_(ag::concat(ag::upsample2x(z2), z1));
  return dec0_(ag::concat(ag::upsample2x(u), z0));
}

template <typename T>
ag::Var<T> ResidualEstimator<T>::attention(const ag::Var<T>& img, const ag::Var<T>& initial) const {
  return ag::sigmoid(diff1_(diff0_(difference_map(img, initial))));
}

template <typename T>
ag::Var<T> ResidualEstimator<T>::estimate(const ag::Var<T>& img, const ag::Var<T>& initial) const {
  const ag::Var<T> z = features(img, initial);
  const ag::Var<T> gain = ag::add_scalar(ps_->var(alpha_) * attention(img, initial), T(1));
  return ag::sigmoid(out_(z * gain));
}

template class DegradationEstimator<float>;
template class DegradationEstimator<double>;
template class ResidualEstimator<float>;
template class ResidualEstimator<double>;
template ag::Var<float> difference_map(const ag::Var<float>&, const ag::Var<float>&);
template ag::Var<double> difference_map(const ag::Var<double>&, const ag::Var<double>&);

}  // namespace tide
