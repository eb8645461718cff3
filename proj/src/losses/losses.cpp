#include "tide/losses.hpp"

#include <cmath>

namespace tide {

namespace {

template <typename T>
void same_shape(const ag::Var<T>& a, const ag::Var<T>& b, const char* what) {
  if (!(a.shape() == b.shape()))
    throw Error(ErrorCode::BadShape, std::string(what) + ": " + a.shape().str() + " vs " + b.shape().str());
}

template <typename T>
ag::Var<T> mae(const ag::Var<T>& a, const ag::Var<T>& b) {
  return ag::mean_all(ag::abs(a - b));
}

template <typename T>
ag::Var<T> weighted(const ag::Var<T>& term, double w) {
  return ag::mul_scalar(term, static_cast<T>(w));
}

}  // namespace

template <typename T>
ag::Var<T> ssim(const ag::Var<T>& a, const ag::Var<T>& b, const SsimParams& p) {
  same_shape(a, b, "ssim");
  const T c1 = static_cast<T>((p.k1) * (p.k1));
  const T c2 = static_cast<T>((p.k2) * (p.k2));
  auto blur = [&](const ag::Var<T>& x) { return ag::gaussian_blur_valid(x, p.window, p.sigma); };
  const ag::Var<T> mu_a = blur(a);
  const ag::Var<T> mu_b = blur(b);
  const ag::Var<T> mu_aa = mu_a * mu_a;
  const ag::Var<T> mu_bb = mu_b * mu_b;
  const ag::Var<T> mu_ab = mu_a * mu_b;
  const ag::Var<T> s_aa = blur(a * a) - mu_aa;
  const ag::Var<T> s_bb = blur(b * b) - mu_bb;
  const ag::Var<T> s_ab = blur(a * b) - mu_ab;
  const ag::Var<T> num = ag::add_scalar(ag::mul_scalar(mu_ab, T(2)), c1) * ag::add_scalar(ag::mul_scalar(s_ab, T(2)), c2);
  const ag::Var<T> den = ag::add_scalar(mu_aa + mu_bb, c1) * ag::add_scalar(s_aa + s_bb, c2);
  return ag::mean_all(num / den);
}

template <typename T>
ag::Var<T> l1_loss(const ag::Var<T>& pred, const ag::Var<T>& ref) {
  same_shape(pred, ref, "l1_loss");
  return mae(pred, ref);
}

template <typename T>
ag::Var<T> ssim_loss(const ag::Var<T>& pred, const ag::Var<T>& ref, const SsimParams& p) {
  return ag::add_scalar(ag::mul_scalar(ssim(pred, ref, p), T(-1)), T(1));
}

template <typename T>
RandomConvFeatures<T>::RandomConvFeatures(std::uint64_t seed, std::vector<double> weights)
    : ps_(std::make_unique<nn::ParamStore<T>>()), weights_(std::move(weights)) {
  if (weights_.size() != 3) throw Error(ErrorCode::BadParams, "perceptual extractor needs three layer weights");
  stages_.emplace_back(*ps_, "feat.stage0", 3, 8, 3, 1);
  stages_.emplace_back(*ps_, "feat.stage1", 8, 16, 3, 2);
  stages_.emplace_back(*ps_, "feat.stage2", 16, 32, 3, 2);
  ps_->initialize(seed, 0.2);
  ps_->set_trainable("", false);
}

template <typename T>
std::vector<ag::Var<T>> RandomConvFeatures<T>::features(const ag::Var<T>& x) const {
  std::vector<ag::Var<T>> out;
  ag::Var<T> h = x;
  for (const auto& s : stages_) {
    h = ag::leaky_relu(s(h), T(0.2));
    out.push_back(h);
  }
  return out;
}

template <typename T>
ag::Var<T> perceptual_loss(const ag::Var<T>& pred, const ag::Var<T>& ref, const FeatureExtractor<T>& feat) {
  same_shape(pred, ref, "perceptual_loss");
  const auto fp = feat.features(pred);
  std::vector<ag::Var<T>> fr;
  {
    ag::NoGradGuard guard;
    fr = feat.features(ref);
  }
  const auto lambda = feat.layer_weights();
  ag::Var<T> total;
  for (std::size_t l = 0; l < fp.size(); ++l) {
    ag::Var<T> term = weighted(mae(fp[l], fr[l]), lambda.at(l));
    total = total.defined() ? total + term : term;
  }
  return total;
}

template <typename T>
ag::Var<T> diversity_loss(const std::vector<ag::Var<T>>& hyps) {
  const int k = static_cast<int>(hyps.size());
  if (k < 2) throw Error(ErrorCode::CountMismatch, "diversity needs at least two hypotheses");
  for (const auto& h : hyps) same_shape(h, hyps[0], "diversity_loss");
  std::vector<ag::Var<T>> sq;
  for (const auto& h : hyps) sq.push_back(ag::sum_per_sample(h * h));
  const int n = hyps[0].shape().n;
  ag::Var<T> total;
  bool zero_seen = false;
  for (int i = 0; i < k; ++i) {
    for (int j = i + 1; j < k; ++j) {
      const ag::Var<T> dot = ag::sum_per_sample(hyps[i] * hyps[j]);
      Tensor<T> guard(Shape{n, 1, 1, 1});
      Tensor<T> mask(Shape{n, 1, 1, 1});
      for (int s = 0; s < n; ++s) {
        const bool degenerate = sq[i].value()[s] == T(0) || sq[j].value()[s] == T(0);
        zero_seen = zero_seen || degenerate;
        guard[s] = degenerate ? T(1) : T(0);
        mask[s] = degenerate ? T(0) : T(1);
      }
      const ag::Var<T> denom = ag::sqrt(sq[i] * sq[j] + ag::Var<T>(guard));
      const ag::Var<T> cos = dot * ag::Var<T>(mask) / denom;
      total = total.defined() ? total + cos : cos;
    }
  }
  if (zero_seen) warn(Warning::ZeroVector, "all-zero hypothesis excluded from diversity");
  return ag::mul_scalar(ag::mean_all(total), static_cast<T>(2.0 / (k * (k - 1))));
}

template <typename T>
ag::Var<T> consistency_loss(const ag::Var<T>& maps, const ag::Var<T>& img, const ag::Var<T>& ref) {
  same_shape(img, ref, "consistency_loss");
  const Shape& ms = maps.shape();
  if (ms.n != img.shape().n || ms.h != img.shape().h || ms.w != img.shape().w)
    throw Error(ErrorCode::BadShape, "consistency_loss: maps " + ms.str() + " vs image " + img.shape().str());
  ag::Var<T> target;
  {
    ag::NoGradGuard guard;
    const ag::Var<T> diff = ag::mul_scalar(ag::sum_channels(ag::abs(img - ref)), T(1) / img.shape().c);
    target = ag::minmax_normalize(diff, static_cast<T>(kNormEps));
  }
  const ag::Var<T> est = ag::minmax_normalize(ag::sum_channels(maps), static_cast<T>(kNormEps));
  const ag::Var<T> d = est - ag::Var<T>(target.value());
  return ag::mean_all(d * d);
}

template <typename T>
ag::Var<T> aux_loss(const std::vector<ag::Var<T>>& hyps, const ag::Var<T>& ref) {
  if (hyps.empty()) throw Error(ErrorCode::CountMismatch, "aux_loss needs hypotheses");
  ag::Var<T> total;
  for (const auto& h : hyps) {
    same_shape(h, ref, "aux_loss");
    const ag::Var<T> term = mae(h, ref);
    total = total.defined() ? total + term : term;
  }
  return ag::mul_scalar(total, T(1) / static_cast<T>(hyps.size()));
}

template <typename T>
ag::Var<T> magnitude_loss(const ag::Var<T>& correction) {
  return ag::mean_all(ag::abs(correction));
}

template <typename T>
ag::Var<T> improvement_loss(const ag::Var<T>& final_img, const ag::Var<T>& initial, const ag::Var<T>& ref, T eps) {
  same_shape(final_img, ref, "improvement_loss");
  same_shape(initial, ref, "improvement_loss");
  const Shape& s = ref.shape();
  const T inv = T(1) / static_cast<T>(static_cast<long>(s.c) * s.h * s.w);
  const ag::Var<T> mae_final = ag::mul_scalar(ag::sum_per_sample(ag::abs(final_img - ref)), inv);
  const ag::Var<T> mae_init = ag::mul_scalar(ag::sum_per_sample(ag::abs(initial - ref)), inv);
  return ag::mean_all(ag::relu(ag::add_scalar(mae_final - mae_init, eps)));
}

template <typename T>
Stage1Loss<T> stage1_total(const ag::Var<T>& pred, const ag::Var<T>& ref, const std::vector<ag::Var<T>>& hyps,
                           const ag::Var<T>& maps, const ag::Var<T>& img, const LossWeights& w,
                           const FeatureExtractor<T>& feat) {
  Stage1Loss<T> r;
  r.l1 = l1_loss(pred, ref);
  r.ssim = ssim_loss(pred, ref);
  r.perceptual = perceptual_loss(pred, ref, feat);
  r.diversity = diversity_loss(hyps);
  r.consistency = consistency_loss(maps, img, ref);
  r.aux = aux_loss(hyps, ref);
  r.total = weighted(r.l1, w.l1) + weighted(r.ssim, w.ssim) + weighted(r.perceptual, w.perceptual) +
            weighted(r.diversity, w.diversity) + weighted(r.consistency, w.consistency) + weighted(r.aux, w.aux);
  return r;
}

template <typename T>
Stage2Loss<T> stage2_total(const ag::Var<T>& final_img, const ag::Var<T>& initial, const ag::Var<T>& ref,
                           const ag::Var<T>& correction, const LossWeights& w, const FeatureExtractor<T>& feat) {
  Stage2Loss<T> r;
  r.l1 = l1_loss(final_img, ref);
  r.ssim = ssim_loss(final_img, ref);
  r.perceptual = perceptual_loss(final_img, ref, feat);
  r.magnitude = magnitude_loss(correction);
  r.improvement = improvement_loss(final_img, initial, ref, static_cast<T>(w.epsilon));
  r.total = weighted(r.l1, w.l1) + weighted(r.ssim, w.ssim) + weighted(r.perceptual, w.perceptual) +
            weighted(r.magnitude, w.magnitude) + weighted(r.improvement, w.improve);
  return r;
}

#define TIDE_INSTANTIATE_LOSSES(T)                                                                                 \
  template ag::Var<T> ssim(const ag::Var<T>&, const ag::Var<T>&, const SsimParams&);                               \
  template ag::Var<T> l1_loss(const ag::Var<T>&, const ag::Var<T>&);                                              \
  template ag::Var<T> ssim_loss(const ag::Var<T>&, const ag::Var<T>&, const SsimParams&);                          \
  template class RandomConvFeatures<T>;                                                                            \
  template ag::Var<T> perceptual_loss(const ag::Var<T>&, const ag::Var<T>&, const FeatureExtractor<T>&);          \
  template ag::Var<T> diversity_loss(const std::vector<ag::Var<T>>&);                                             \
  template ag::Var<T> consistency_loss(const ag::Var<T>&, const ag::Var<T>&, const ag::Var<T>&);                  \
  template ag::Var<T> aux_loss(const std::vector<ag::Var<T>>&, const ag::Var<T>&);                                \
  template ag::Var<T> magnitude_loss(const ag::Var<T>&);                                                          \
  template ag::Var<T> improvement_loss(const ag::Var<T>&, const ag::Var<T>&, const ag::Var<T>&, T);               \
  template Stage1Loss<T> stage1_total(const ag::Var<T>&, const ag::Var<T>&, const std::vector<ag::Var<T>>&,        \
                                      const ag::Var<T>&, const ag::Var<T>&, const LossWeights&,                    \
                                      const FeatureExtractor<T>&);                                                 \
  template Stage2Loss<T> stage2_total(const ag::Var<T>&, const ag::Var<T>&, const ag::Var<T>&, const ag::Var<T>&, \
                                      const LossWeights&, const FeatureExtractor<T>&);

TIDE_INSTANTIATE_LOSSES(float)
TIDE_INSTANTIATE_LOSSES(double)

}  // namespace tide
