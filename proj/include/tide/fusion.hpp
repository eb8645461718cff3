#pragma once

#include <vector>

#include "tide/core.hpp"
#include "tide/layers.hpp"

namespace tide {

enum class FusionStrategy { Direct, Learned };

/// Floor added to the per-pixel map sum in direct fusion.
inline constexpr double kDirectFusionFloor = 1e-6;

/// sum_k M_k H_k / (sum_j M_j + 1e-6). All-zero maps yield zero output and a
/// DegenerateMaps warning.
template <typename T>
ag::Var<T> fuse_direct(const ag::Var<T>& maps, const std::vector<ag::Var<T>>& hyps);

/// sum_k W_k H_k for weights NxKxHxW.
template <typename T>
ag::Var<T> weighted_sum(const ag::Var<T>& weights, const std::vector<ag::Var<T>>& images);

/// Mapping f_W: lrelu(conv3x3 K->h), residual lrelu(conv3x3 h->h), conv1x1 h->K,
/// then a per-pixel softmax over K.
template <typename T>
class LearnedFusion {
 public:
  struct Result {
    ag::Var<T> image;
    ag::Var<T> weights;
  };

  LearnedFusion() = default;
  LearnedFusion(nn::ParamStore<T>& ps, const std::string& scope, int k_types, int hidden, double slope);

  ag::Var<T> logits(const ag::Var<T>& maps) const;
  ag::Var<T> weights(const ag::Var<T>& maps) const { return ag::softmax_channels(logits(maps)); }
  Result fuse(const ag::Var<T>& maps, const std::vector<ag::Var<T>>& hyps) const;

  const nn::Conv<T>& input() const { return in_; }
  const nn::Conv<T>& hidden() const { return mid_; }
  const nn::Conv<T>& output() const { return out_; }

 private:
  nn::Conv<T> in_, mid_, out_;
  T slope_ = T(0.2);
};

}  // namespace tide
