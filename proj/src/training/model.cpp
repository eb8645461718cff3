#include "tide/model.hpp"

namespace tide {

template <typename T>
TideModel<T>::TideModel(const ModelConfig& cfg, bool with_refinement, bool allocate)
    : cfg_(cfg), with_refinement_(with_refinement), ps_(std::make_unique<nn::ParamStore<T>>(allocate)) {
  cfg.validate();
  nn::ParamStore<T>& ps = *ps_;
  encoder_ = Encoder<T>(ps, "base.encoder", cfg);
  estimator_ = DegradationEstimator<T>(ps, "base.estimator", cfg);
  for (DegradationKind k : kAllKinds)
    decoders_.emplace_back(ps, "base.decoder_" + std::string(to_string(k)), cfg, k);
  fusion_ = LearnedFusion<T>(ps, "base.fusion", cfg.k_types, cfg.fusion_hidden, cfg.negative_slope);
  if (with_refinement) {
    residual_ = ResidualEstimator<T>(ps, "refine.residual", cfg);
    for (DegradationKind k : kAllKinds)
      experts_.emplace_back(ps, "refine.expert_" + std::string(to_string(k)), cfg, k);
    gate_ = SafetyGate<T>(ps, "refine.gate", cfg);
    refine_fusion_ = RefineFusion<T>(ps, "refine.fusion", cfg);
  }
}

template <typename T>
BaseOutputs<T> TideModel<T>::forward_base(const ag::Var<T>& img, FusionStrategy strategy) {
  BaseOutputs<T> out;
  const FeatureHierarchy<T> feats = encoder_.extract(img);
  out.maps = estimator_.estimate(img);
  for (const auto& d : decoders_) out.hyps.push_back(d.decode(feats));
  if (strategy == FusionStrategy::Learned) {
    auto fused = fusion_.fuse(out.maps, out.hyps);
    out.weights = fused.weights;
    out.initial = ag::clamp01(fused.image);
  } else {
    out.weights = out.maps / ag::add_scalar(ag::sum_channels(out.maps), static_cast<T>(kDirectFusionFloor));
    out.initial = ag::clamp01(fuse_direct(out.maps, out.hyps));
  }
  return out;
}

template <typename T>
RefineOutputs<T> TideModel<T>::forward_refine(const ag::Var<T>& img, const ag::Var<T>& initial, T gate_scale) {
  if (!with_refinement_) throw Error(ErrorCode::PhaseMismatch, "model has no refinement stage");
  RefineOutputs<T> out;
  out.residual = residual_.estimate(img, initial);
  for (const auto& e : experts_) out.corrections.push_back(e.correct(img, initial));
  out.fusion = fuse_corrections(out.residual, out.corrections, initial, gate_, refine_fusion_,
                                ps_->var(gate_.scale_id()), gate_scale);
  return out;
}

template class TideModel<float>;
template class TideModel<double>;

}  // namespace tide
