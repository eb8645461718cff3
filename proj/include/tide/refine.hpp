#pragma once

#include <memory>
#include <vector>

#include "tide/core.hpp"
#include "tide/layers.hpp"

namespace tide {

/// Groups of the noise expert's convolution, max(1, min(C/4, C)).
int expert_noise_groups(int channels);

/// Initial value of every expert scale s_k.
inline constexpr double kExpertScaleInit = 0.1;

/// One refinement expert: C_k = tanh(f_k([I, J1])) * sigmoid(s_k), where
/// f_k is an init block, two residual blocks and a kind-specific head ending
/// in a projection to three channels.
template <typename T>
class RefinementExpert {
 public:
  RefinementExpert() = default;
  RefinementExpert(nn::ParamStore<T>& ps, const std::string& scope, const ModelConfig& cfg, DegradationKind kind);

  ag::Var<T> correct(const ag::Var<T>& img, const ag::Var<T>& initial) const;
  /// f_k before tanh and scaling.
  ag::Var<T> raw(const ag::Var<T>& img, const ag::Var<T>& initial) const;

  DegradationKind kind() const { return kind_; }
  int scale_id() const { return scale_; }
  /// Final projection; zeroing it silences the expert.
  const nn::Conv<T>& output() const { return proj_; }
  const nn::ConvBlock<T>& first() const { return init_; }

 private:
  ag::Var<T> head(const ag::Var<T>& x) const;

  nn::ParamStore<T>* ps_ = nullptr;
  DegradationKind kind_ = DegradationKind::Color;
  nn::ConvBlock<T> init_;
  nn::ResidualBlock<T> res1_, res2_;
  nn::ConvBlock<T> phi1_, phi2_, phi3_;
  nn::ResidualBlock<T> extra_;
  nn::Conv<T> grouped_;
  nn::Conv<T> proj_;
  int scale_ = -1;
};

/// G = sigmoid(conv(lrelu(conv(J1)))), Nx1xHxW.
template <typename T>
class SafetyGate {
 public:
  SafetyGate() = default;
  SafetyGate(nn::ParamStore<T>& ps, const std::string& scope, const ModelConfig& cfg);
  ag::Var<T> mask(const ag::Var<T>& initial) const;
  int scale_id() const { return scale_; }
  const nn::Conv<T>& output() const { return c2_; }

 private:
  nn::Conv<T> c1_, c2_;
  T slope_ = T(0.2);
  int scale_ = -1;
};

/// W_r = softmax(f_r'(M_r)).
template <typename T>
class RefineFusion {
 public:
  RefineFusion() = default;
  RefineFusion(nn::ParamStore<T>& ps, const std::string& scope, const ModelConfig& cfg);
  ag::Var<T> weights(const ag::Var<T>& residual) const;

 private:
  nn::Conv<T> c1_, c2_;
  T slope_ = T(0.2);
};

template <typename T>
struct CorrectionOutputs {
  ag::Var<T> weights;   // W_r, NxKxHxW
  ag::Var<T> gate;      // G, Nx1xHxW (after any test scaling)
  ag::Var<T> fused;     // C = C' * G * sigmoid(s_g)
  ag::Var<T> final;     // clamp(J1 + C)
};

/// Safety-gated fusion of expert corrections. `gate_scale` multiplies the
/// mask; 1 in normal operation.
template <typename T>
CorrectionOutputs<T> fuse_corrections(const ag::Var<T>& residual, const std::vector<ag::Var<T>>& corrections,
                                      const ag::Var<T>& initial, const SafetyGate<T>& gate,
                                      const RefineFusion<T>& fusion, const ag::Var<T>& global_scale,
                                      T gate_scale = T(1));

}  // namespace tide
