#pragma once

#include "tide/backbone.hpp"

namespace tide {

/// First-stage estimator D: a small encoder-decoder with global context and
/// concatenating skips. Output M = sigmoid(W_o(...)), NxKxHxW.
template <typename T>
class DegradationEstimator {
 public:
  DegradationEstimator() = default;
  DegradationEstimator(nn::ParamStore<T>& ps, const std::string& scope, const ModelConfig& cfg);
  ag::Var<T> estimate(const ag::Var<T>& img) const;
  const nn::Conv<T>& output() const { return out_; }

 private:
  nn::ConvBlock<T> enc0_, enc1_, enc2_, merge_, dec1_, dec0_;
  nn::ChannelGate<T> context_;
  nn::Conv<T> out_;
};

/// D = |I - J1|.
template <typename T>
ag::Var<T> difference_map(const ag::Var<T>& img, const ag::Var<T>& initial);

/// Second-stage estimator D2:
///   A = sigmoid(f_d(|I - J1|)), z = f_r([I, J1]) * (1 + alpha A),
///   M_r = sigmoid(W_r z).
template <typename T>
class ResidualEstimator {
 public:
  ResidualEstimator() = default;
  ResidualEstimator(nn::ParamStore<T>& ps, const std::string& scope, const ModelConfig& cfg);
  ag::Var<T> estimate(const ag::Var<T>& img, const ag::Var<T>& initial) const;
  /// The attention signal A alone (Nx1xHxW).
  ag::Var<T> attention(const ag::Var<T>& img, const ag::Var<T>& initial) const;
  /// Unmodulated features f_r([I, J1]).
  ag::Var<T> features(const ag::Var<T>& img, const ag::Var<T>& initial) const;

  int alpha_id() const { return alpha_; }
  const nn::ConvBlock<T>& diff_first() const { return diff0_; }
  const nn::Conv<T>& diff_out() const { return diff1_; }
  const nn::Conv<T>& output() const { return out_; }

 private:
  nn::ParamStore<T>* ps_ = nullptr;
  nn::ConvBlock<T> enc0_, enc1_, enc2_, dec1_, dec0_;
  nn::ConvBlock<T> diff0_;
  nn::Conv<T> diff1_;
  nn::Conv<T> out_;
  int alpha_ = -1;
};

}  // namespace tide
