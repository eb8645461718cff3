#pragma once

#include <vector>

#include "tide/core.hpp"
#include "tide/layers.hpp"

namespace tide {

/// Levels f_0..f_N of the shared encoder; level i is (H/2^i)x(W/2^i).
template <typename T>
using FeatureHierarchy = std::vector<ag::Var<T>>;

/// Squeeze ratio of the global-context block.
inline constexpr int kGlobalContextReduction = 4;

/// Hierarchical encoder with a residual bottleneck:
///   f_0 = cb(I), f_i = cb_stride2(f_{i-1}), f_N <- f_N + sum_j rho_j(f_N).
template <typename T>
class Encoder {
 public:
  Encoder() = default;
  Encoder(nn::ParamStore<T>& ps, const std::string& scope, const ModelConfig& cfg);

  /// With `bottleneck` false the residual sum is skipped (the plain encoder).
  FeatureHierarchy<T> extract(const ag::Var<T>& img, bool bottleneck = true) const;

  const std::vector<nn::ConvBlock<T>>& stages() const { return stages_; }
  const std::vector<nn::ResidualBranch<T>>& bottleneck() const { return blocks_; }

 private:
  ModelConfig cfg_;
  std::vector<nn::ConvBlock<T>> stages_;
  std::vector<nn::ResidualBranch<T>> blocks_;
};

}  // namespace tide
