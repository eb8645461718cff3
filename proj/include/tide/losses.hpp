#pragma once

#include <memory>
#include <vector>

#include "tide/core.hpp"
#include "tide/layers.hpp"

namespace tide {

struct SsimParams {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
};

/// Mean structural similarity over the valid region of a Gaussian window,
/// dynamic range 1. Throws TooSmall when H or W is below the window.
template <typename T>
ag::Var<T> ssim(const ag::Var<T>& a, const ag::Var<T>& b, const SsimParams& p = {});

template <typename T>
ag::Var<T> l1_loss(const ag::Var<T>& pred, const ag::Var<T>& ref);
template <typename T>
ag::Var<T> ssim_loss(const ag::Var<T>& pred, const ag::Var<T>& ref, const SsimParams& p = {});

/// Feature pyramid for the perceptual loss. Implementations must be fixed
/// (their parameters never train).
template <typename T>
class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  virtual std::vector<ag::Var<T>> features(const ag::Var<T>& x) const = 0;
  /// One weight per returned feature level.
  virtual std::vector<double> layer_weights() const = 0;
};

/// Default extractor: three conv + leaky ReLU stages (3->8, 8->16 /2,
/// 16->32 /2) with weights drawn from a fixed seed, lambda_l = 1.
template <typename T>
class RandomConvFeatures final : public FeatureExtractor<T> {
 public:
  explicit RandomConvFeatures(std::uint64_t seed = 20240917, std::vector<double> weights = {1.0, 1.0, 1.0});
  std::vector<ag::Var<T>> features(const ag::Var<T>& x) const override;
  std::vector<double> layer_weights() const override { return weights_; }
  const nn::ParamStore<T>& params() const { return *ps_; }

 private:
  std::unique_ptr<nn::ParamStore<T>> ps_;
  std::vector<nn::Conv<T>> stages_;
  std::vector<double> weights_;
};

template <typename T>
ag::Var<T> perceptual_loss(const ag::Var<T>& pred, const ag::Var<T>& ref, const FeatureExtractor<T>& feat);

/// Mean over hypothesis pairs (and batch samples) of the cosine similarity of
/// flattened hypotheses. A pair involving an all-zero hypothesis contributes
/// 0 and raises a ZeroVector warning.
template <typename T>
ag::Var<T> diversity_loss(const std::vector<ag::Var<T>>& hyps);

/// MSE(norm(sum_k M_k), norm(mean_c |I - J|)) with per-sample min-max norm.
template <typename T>
ag::Var<T> consistency_loss(const ag::Var<T>& maps, const ag::Var<T>& img, const ag::Var<T>& ref);

template <typename T>
ag::Var<T> aux_loss(const std::vector<ag::Var<T>>& hyps, const ag::Var<T>& ref);
template <typename T>
ag::Var<T> magnitude_loss(const ag::Var<T>& correction);
/// Per-sample max(0, mae(final) - mae(initial) + eps), averaged over the batch.
template <typename T>
ag::Var<T> improvement_loss(const ag::Var<T>& final_img, const ag::Var<T>& initial, const ag::Var<T>& ref, T eps);

/// Guard used by the min-max normalization of the consistency loss.
inline constexpr double kNormEps = 1e-8;

template <typename T>
struct Stage1Loss {
  ag::Var<T> total, l1, ssim, perceptual, diversity, consistency, aux;
};

template <typename T>
struct Stage2Loss {
  ag::Var<T> total, l1, ssim, perceptual, magnitude, improvement;
};

template <typename T>
Stage1Loss<T> stage1_total(const ag::Var<T>& pred, const ag::Var<T>& ref, const std::vector<ag::Var<T>>& hyps,
                           const ag::Var<T>& maps, const ag::Var<T>& img, const LossWeights& w,
                           const FeatureExtractor<T>& feat);

template <typename T>
Stage2Loss<T> stage2_total(const ag::Var<T>& final_img, const ag::Var<T>& initial, const ag::Var<T>& ref,
                           const ag::Var<T>& correction, const LossWeights& w, const FeatureExtractor<T>& feat);

}  // namespace tide
