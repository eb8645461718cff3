#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "tide/losses.hpp"
#include "tide/model.hpp"

namespace tide {

enum class Phase { Base, Refine, Combined };
std::string_view to_string(Phase p);
Phase phase_from_string(std::string_view s);

struct TrainConfig {
  Phase phase = Phase::Base;
  double lr = 1e-4;
  double weight_decay = 1e-4;
  int epochs = 300;
  int batch = 16;
  int cycle_epochs = 50;
  double clip_norm = 1.0;
  double lr_min = 1e-6;
  std::uint64_t seed = 0;
  /// When positive, stop after this many optimizer steps.
  long max_steps = 0;
  /// Single-threaded kernels and a seeded data order.
  bool deterministic = true;
  LossWeights loss_weights;
  ModelConfig model;

  static TrainConfig base_defaults();
  static TrainConfig refine_defaults();
  static TrainConfig combined_defaults();
};

/// Degraded inputs paired with clean references, all one resolution.
struct PairedDataset {
  std::vector<Image> inputs;
  std::vector<Image> targets;
  std::vector<std::string> names;

  std::size_t size() const { return inputs.size(); }
  /// Throws EmptyDataset or ShapeMismatch.
  void validate(const ModelConfig& cfg) const;
};

struct NamedTensor {
  std::string name;
  Shape shape;
  std::vector<float> data;
};

struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;
  std::uint32_t version = kVersion;
  ModelConfig model;
  Phase phase = Phase::Base;
  std::int64_t step = 0;
  std::uint64_t seed = 0;
  std::vector<NamedTensor> tensors;

  bool has_refinement() const;
  const NamedTensor* find(const std::string& name) const;
  /// FNV-1a 64 over names, shapes and bytes of the "base." tensors.
  std::string base_digest() const;
  /// Same over every tensor.
  std::string digest() const;
};

Checkpoint make_checkpoint(const TideModel<float>& model, Phase phase, std::int64_t step, std::uint64_t seed);
/// Copies tensors into `model` by name. Tensors the model lacks are an error;
/// model parameters absent from the checkpoint are left untouched.
void load_into(const Checkpoint& ckpt, TideModel<float>& model);

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(const std::string& bytes);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Cosine annealing with warm restarts; one cycle spans
/// cycle_epochs * steps_per_epoch optimizer steps.
double lr_schedule(long step, long steps_per_epoch, const TrainConfig& cfg);
long steps_per_epoch(std::size_t dataset_size, int batch);

/// Adam with L2 weight decay added to the gradient.
class Adam {
 public:
  Adam(nn::ParamStore<float>& ps, double weight_decay, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(double lr);
  long steps() const { return t_; }

 private:
  nn::ParamStore<float>& ps_;
  double wd_, b1_, b2_, eps_;
  long t_ = 0;
  std::vector<std::vector<float>> m_, v_;
};

/// Global L2 norm of trainable gradients.
double grad_norm(const nn::ParamStore<float>& ps);
/// Rescales gradients so their global norm is at most `max_norm`; returns
/// the norm after clipping.
double clip_gradients(nn::ParamStore<float>& ps, double max_norm);

/// Column names and one row of values per optimizer step.
struct TrainLog {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  std::string csv() const;
  std::vector<double> column(const std::string& name) const;
};

struct TrainResult {
  Checkpoint checkpoint;
  TrainLog log;
};

using StepCallback = std::function<void(const TrainLog&)>;

TrainResult train_base(const PairedDataset& data, const TrainConfig& cfg, const StepCallback& on_step = {});
TrainResult train_refine(const PairedDataset& data, const Checkpoint& base, const TrainConfig& cfg,
                         const StepCallback& on_step = {});
TrainResult train_combined(const PairedDataset& data, const Checkpoint& full, const TrainConfig& cfg,
                           const StepCallback& on_step = {});

/// Objective of the combined phase for one batch.
template <typename T>
struct CombinedLoss {
  ag::Var<T> total;
  Stage1Loss<T> stage1;
  Stage2Loss<T> stage2;
};
template <typename T>
CombinedLoss<T> combined_objective(TideModel<T>& model, const ag::Var<T>& img, const ag::Var<T>& ref,
                                   const LossWeights& w, const FeatureExtractor<T>& feat);

struct RestorationResult {
  Tensor<float> initial;                  // 1x3xHxW
  Tensor<float> final;                    // 1x3xHxW
  Tensor<float> maps;                     // 1xKxHxW
  std::vector<Tensor<float>> hypotheses;  // K of 1x3xHxW
  Tensor<float> fusion_weights;           // 1xKxHxW
  bool refined = false;
  // Populated when the checkpoint has a refinement stage.
  Tensor<float> residual_maps;
  std::vector<Tensor<float>> corrections;
  Tensor<float> gate;
  Tensor<float> fused_correction;
  std::vector<float> expert_scales;
  float global_scale = 0;
  float alpha = 0;
};

/// Inference wrapper holding a model built from a checkpoint. restore() is
/// pure: identical inputs give bit-identical outputs.
class Restorer {
 public:
  explicit Restorer(const Checkpoint& ckpt);
  RestorationResult restore(const Image& img);
  /// Batched forward returning only the final images (for throughput runs).
  Tensor<float> restore_batch(const Tensor<float>& batch);
  const ModelConfig& config() const { return model_->config(); }

 private:
  std::unique_ptr<TideModel<float>> model_;
};

RestorationResult restore(const Image& img, const Checkpoint& ckpt);

struct ParamCounts {
  std::size_t base = 0;
  std::size_t refine = 0;
  double ratio() const { return base ? static_cast<double>(refine) / static_cast<double>(base) : 0.0; }
};
ParamCounts count_parameters(const ModelConfig& cfg, bool with_refinement = true);
ParamCounts count_parameters(const Checkpoint& ckpt);

}  // namespace tide
