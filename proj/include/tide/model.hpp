#pragma once

#include <memory>
#include <vector>

#include "tide/decoders.hpp"
#include "tide/degradation.hpp"
#include "tide/fusion.hpp"
#include "tide/refine.hpp"

namespace tide {

template <typename T>
struct BaseOutputs {
  ag::Var<T> maps;                // M, NxKxHxW
  std::vector<ag::Var<T>> hyps;   // H_k, each Nx3xHxW
  ag::Var<T> weights;             // fusion weights, NxKxHxW
  ag::Var<T> initial;             // J1
};

template <typename T>
struct RefineOutputs {
  ag::Var<T> residual;                  // M_r
  std::vector<ag::Var<T>> corrections;  // C_k
  CorrectionOutputs<T> fusion;          // W_r, G, C, final
};

/// The complete two-stage network. Parameters live in one store; names are
/// prefixed "base." for stage one and "refine." for stage two.
template <typename T>
class TideModel {
 public:
  /// `allocate` false builds the parameter table only (for counting).
  explicit TideModel(const ModelConfig& cfg, bool with_refinement = true, bool allocate = true);
  TideModel(const TideModel&) = delete;
  TideModel& operator=(const TideModel&) = delete;

  const ModelConfig& config() const { return cfg_; }
  bool has_refinement() const { return with_refinement_; }
  nn::ParamStore<T>& params() { return *ps_; }
  const nn::ParamStore<T>& params() const { return *ps_; }
  void initialize(std::uint64_t seed) { ps_->initialize(seed, cfg_.negative_slope); }

  BaseOutputs<T> forward_base(const ag::Var<T>& img, FusionStrategy strategy = FusionStrategy::Learned);
  RefineOutputs<T> forward_refine(const ag::Var<T>& img, const ag::Var<T>& initial, T gate_scale = T(1));

  const Encoder<T>& encoder() const { return encoder_; }
  const DegradationEstimator<T>& estimator() const { return estimator_; }
  const Decoder<T>& decoder(int k) const { return decoders_.at(k); }
  const LearnedFusion<T>& fusion() const { return fusion_; }
  const ResidualEstimator<T>& residual_estimator() const { return residual_; }
  const RefinementExpert<T>& expert(int k) const { return experts_.at(k); }
  const SafetyGate<T>& gate() const { return gate_; }
  const RefineFusion<T>& refine_fusion() const { return refine_fusion_; }

 private:
  ModelConfig cfg_;
  bool with_refinement_;
  std::unique_ptr<nn::ParamStore<T>> ps_;
  Encoder<T> encoder_;
  DegradationEstimator<T> estimator_;
  std::vector<Decoder<T>> decoders_;
  LearnedFusion<T> fusion_;
  ResidualEstimator<T> residual_;
  std::vector<RefinementExpert<T>> experts_;
  SafetyGate<T> gate_;
  RefineFusion<T> refine_fusion_;
};

}  // namespace tide
