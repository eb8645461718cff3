#include "tide/refine.hpp"

#include "tide/fusion.hpp"

namespace tide {

int expert_noise_groups(int channels) { return std::max(1, std::min(channels / 4, channels)); }

template <typename T>
RefinementExpert<T>::RefinementExpert(nn::ParamStore<T>& ps, const std::string& scope, const ModelConfig& cfg,
                                      DegradationKind kind)
    : ps_(&ps), kind_(kind) {
  const int w = cfg.refine_channels;
  const double a = cfg.negative_slope;
  init_ = nn::ConvBlock<T>(ps, nn::join(scope, "init"), 6, w, a);
  res1_ = nn::ResidualBlock<T>(ps, nn::join(scope, "res1"), w, a);
  res2_ = nn::ResidualBlock<T>(ps, nn::join(scope, "res2"), w, a);
  switch (kind) {
    case DegradationKind::Color:
      phi1_ = nn::ConvBlock<T>(ps, nn::join(scope, "phi1"), w, w, a);
      proj_ = nn::Conv<T>(ps, nn::join(scope, "proj"), w, 3, 3);
      break;
    case DegradationKind::Contrast:
      phi1_ = nn::ConvBlock<T>(ps, nn::join(scope, "phi1"), w, w, a);
      extra_ = nn::ResidualBlock<T>(ps, nn::join(scope, "res3"), w, a);
      proj_ = nn::Conv<T>(ps, nn::join(scope, "proj"), w, 3, 3);
      break;
    case DegradationKind::Detail:
      phi1_ = nn::ConvBlock<T>(ps, nn::join(scope, "phi1"), w, w, a);
      phi2_ = nn::ConvBlock<T>(ps, nn::join(scope, "phi2"), w, w, a);
      phi3_ = nn::ConvBlock<T>(ps, nn::join(scope, "phi3"), w, w, a);
      proj_ = nn::Conv<T>(ps, nn::join(scope, "proj"), w, 3, 1);
      break;
    case DegradationKind::Noise:
      phi1_ = nn::ConvBlock<T>(ps, nn::join(scope, "phi1"), w, w, a);
      grouped_ = nn::Conv<T>(ps, nn::join(scope, "grouped"), w, w, 3, 1, expert_noise_groups(w));
      proj_ = nn::Conv<T>(ps, nn::join(scope, "proj"), w, 3, 1);
      break;
  }
  scale_ = ps.add(nn::join(scope, "scale"), Shape{1, 1, 1, 1}, nn::Init::Constant, 1, kExpertScaleInit);
}

template <typename T>
ag::Var<T> RefinementExpert<T>::head(const ag::Var<T>& x) const {
  switch (kind_) {
    case DegradationKind::Color: return proj_(phi1_(x));
    case DegradationKind::Contrast: return proj_(extra_(phi1_(x)));
    case DegradationKind::Detail: {
      const ag::Var<T> a = phi1_(x);
      const ag::Var<T> b = phi2_(a + x);
      const ag::Var<T> c = phi3_(b + a);
      return proj_(c + phi2_(a));
    }
    case DegradationKind::Noise: return proj_(grouped_(phi1_(x)));
  }
  return {};
}

template <typename T>
ag::Var<T> RefinementExpert<T>::raw(const ag::Var<T>& img, const ag::Var<T>& initial) const {
  if (!(img.shape() == initial.shape()))
    throw Error(ErrorCode::BadShape, "expert inputs " + img.shape().str() + " vs " + initial.shape().str());
  ag::Var<T> x = init_(ag::concat(img, initial));
  x = res1_(x);
  x = res2_(x);
  return head(x);
}

template <typename T>
ag::Var<T> RefinementExpert<T>::correct(const ag::Var<T>& img, const ag::Var<T>& initial) const {
  return ag::tanh(raw(img, initial)) * ag::sigmoid(ps_->var(scale_));
}

template <typename T>
SafetyGate<T>::SafetyGate(nn::ParamStore<T>& ps, const std::string& scope, const ModelConfig& cfg)
    : c1_(ps, nn::join(scope, "conv1"), 3, cfg.gate_hidden, 3),
      c2_(ps, nn::join(scope, "conv2"), cfg.gate_hidden, 1, 3),
      slope_(static_cast<T>(cfg.negative_slope)) {
  scale_ = ps.add(nn::join(scope, "scale"), Shape{1, 1, 1, 1}, nn::Init::Zero);
}

template <typename T>
ag::Var<T> SafetyGate<T>::mask(const ag::Var<T>& initial) const {
  return ag::sigmoid(c2_(ag::leaky_relu(c1_(initial), slope_)));
}

template <typename T>
RefineFusion<T>::RefineFusion(nn::ParamStore<T>& ps, const std::string& scope, const ModelConfig& cfg)
    : c1_(ps, nn::join(scope, "conv1"), cfg.k_types, cfg.refine_fusion_hidden, 3),
      c2_(ps, nn::join(scope, "conv2"), cfg.refine_fusion_hidden, cfg.k_types, 3),
      slope_(static_cast<T>(cfg.negative_slope)) {}

template <typename T>
ag::Var<T> RefineFusion<T>::weights(const ag::Var<T>& residual) const {
  return ag::softmax_channels(c2_(ag::leaky_relu(c1_(residual), slope_)));
}

template <typename T>
CorrectionOutputs<T> fuse_corrections(const ag::Var<T>& residual, const std::vector<ag::Var<T>>& corrections,
                                      const ag::Var<T>& initial, const SafetyGate<T>& gate,
                                      const RefineFusion<T>& fusion, const ag::Var<T>& global_scale, T gate_scale) {
  if (static_cast<int>(corrections.size()) != residual.shape().c)
    throw Error(ErrorCode::CountMismatch, std::to_string(residual.shape().c) + " residual maps but " +
                                              std::to_string(corrections.size()) + " corrections");
  CorrectionOutputs<T> out;
  out.weights = fusion.weights(residual);
  const ag::Var<T> combined = weighted_sum(out.weights, corrections);
  out.gate = gate.mask(initial);
  if (gate_scale != T(1)) out.gate = ag::mul_scalar(out.gate, gate_scale);
  out.fused = combined * out.gate * ag::sigmoid(global_scale);
  out.final = ag::clamp01(initial + out.fused);
  return out;
}

template class RefinementExpert<float>;
template class RefinementExpert<double>;
template class SafetyGate<float>;
template class SafetyGate<double>;
template class RefineFusion<float>;
template class RefineFusion<double>;
template CorrectionOutputs<float> fuse_corrections(const ag::Var<float>&, const std::vector<ag::Var<float>>&,
                                                   const ag::Var<float>&, const SafetyGate<float>&,
                                                   const RefineFusion<float>&, const ag::Var<float>&, float);
template CorrectionOutputs<double> fuse_corrections(const ag::Var<double>&, const std::vector<ag::Var<double>>&,
                                                    const ag::Var<double>&, const SafetyGate<double>&,
                                                    const RefineFusion<double>&, const ag::Var<double>&, double);

}  // namespace tide
