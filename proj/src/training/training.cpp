#include "tide/training.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <sstream>

#include "tide/kernels.hpp"

namespace tide {

namespace {

constexpr double kPi = 3.14159265358979323846;

class ThreadScope {
 public:
  explicit ThreadScope(bool single) : prev_(kernels::num_threads()) {
    if (single) kernels::set_num_threads(1);
  }
  ~ThreadScope() { kernels::set_num_threads(prev_); }

 private:
  int prev_;
};

ag::Var<float> batch_var(const std::vector<Image>& images, const std::vector<int>& idx) {
  std::vector<Tensor<float>> parts;
  parts.reserve(idx.size());
  for (int i : idx) parts.push_back(images[i].tensor());
  return ag::Var<float>(stack<float>(parts));
}

double value(const ag::Var<float>& v) { return static_cast<double>(v.value()[0]); }

// Shared optimizer loop. `step_fn` runs forward and backward for one batch,
// leaves gradients in the store and returns the loss columns of the log row.
template <typename StepFn>
TrainLog run_loop(const PairedDataset& data, const TrainConfig& cfg, TideModel<float>& model,
                  std::vector<std::string> loss_columns, StepFn&& step_fn, const StepCallback& on_step) {
  TrainLog log;
  log.columns = {"step", "lr"};
  log.columns.insert(log.columns.end(), loss_columns.begin(), loss_columns.end());
  log.columns.push_back("grad_norm");

  const long spe = steps_per_epoch(data.size(), cfg.batch);
  long total = static_cast<long>(cfg.epochs) * spe;
  if (cfg.max_steps > 0) total = std::min(total, cfg.max_steps);

  auto& ps = model.params();
  Adam opt(ps, cfg.weight_decay);
  std::vector<int> order(data.size());
  for (long step = 0; step < total; ++step) {
    const long in_epoch = step % spe;
    if (in_epoch == 0) {
      std::iota(order.begin(), order.end(), 0);
      std::mt19937_64 rng(cfg.seed * 0x9E3779B97F4A7C15ull + static_cast<std::uint64_t>(step / spe));
      for (std::size_t i = order.size(); i > 1; --i) {
        std::uniform_int_distribution<std::size_t> pick(0, i - 1);
        std::swap(order[i - 1], order[pick(rng)]);
      }
    }
    const std::size_t lo = static_cast<std::size_t>(in_epoch) * cfg.batch;
    const std::size_t hi = std::min(order.size(), lo + static_cast<std::size_t>(cfg.batch));
    const std::vector<int> idx(order.begin() + static_cast<long>(lo), order.begin() + static_cast<long>(hi));

    ps.zero_grads();
    std::vector<double> terms = step_fn(idx);
    const double norm = clip_gradients(ps, cfg.clip_norm);
    const double lr = lr_schedule(step, spe, cfg);
    opt.step(lr);

    std::vector<double> row{static_cast<double>(step + 1), lr};
    row.insert(row.end(), terms.begin(), terms.end());
    row.push_back(norm);
    log.rows.push_back(std::move(row));
    if (on_step) on_step(log);
  }
  return log;
}

}  // namespace

TrainConfig TrainConfig::base_defaults() { return TrainConfig{}; }

TrainConfig TrainConfig::refine_defaults() {
  TrainConfig c;
  c.phase = Phase::Refine;
  c.lr = 5e-5;
  c.epochs = 100;
  return c;
}

TrainConfig TrainConfig::combined_defaults() {
  TrainConfig c = refine_defaults();
  c.phase = Phase::Combined;
  return c;
}

void PairedDataset::validate(const ModelConfig& cfg) const {
  if (inputs.empty()) throw Error(ErrorCode::EmptyDataset, "dataset has no pairs");
  if (inputs.size() != targets.size())
    throw Error(ErrorCode::ShapeMismatch, "inputs and targets differ in count");
  const int h = inputs[0].h(), w = inputs[0].w();
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (inputs[i].h() != h || inputs[i].w() != w || targets[i].h() != h || targets[i].w() != w)
      throw Error(ErrorCode::ShapeMismatch, "pair " + std::to_string(i) + " differs from " + std::to_string(h) + "x" +
                                                std::to_string(w));
    validate_image(inputs[i], cfg.n_down);
    validate_image(targets[i], cfg.n_down);
  }
}

long steps_per_epoch(std::size_t dataset_size, int batch) {
  if (batch < 1) throw Error(ErrorCode::BadParams, "batch must be positive");
  return static_cast<long>((dataset_size + batch - 1) / batch);
}

double lr_schedule(long step, long steps_per_epoch_, const TrainConfig& cfg) {
  const long cycle = std::max<long>(1, static_cast<long>(cfg.cycle_epochs) * std::max<long>(1, steps_per_epoch_));
  const long pos = step % cycle;
  const double frac = static_cast<double>(pos) / static_cast<double>(cycle);
  return cfg.lr_min + 0.5 * (cfg.lr - cfg.lr_min) * (1.0 + std::cos(kPi * frac));
}

Adam::Adam(nn::ParamStore<float>& ps, double weight_decay, double beta1, double beta2, double eps)
    : ps_(ps), wd_(weight_decay), b1_(beta1), b2_(beta2), eps_(eps) {
  for (const auto& p : ps.params()) {
    m_.emplace_back(p.trainable ? p.value.size() : 0, 0.0f);
    v_.emplace_back(p.trainable ? p.value.size() : 0, 0.0f);
  }
}

void Adam::step(double lr) {
  ++t_;
  const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
  auto& params = ps_.params();
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    if (!p.trainable) continue;
    float* w = p.value.data();
    const float* g = p.grad.data();
    float* m = m_[i].data();
    float* v = v_[i].data();
    for (std::size_t j = 0; j < p.value.size(); ++j) {
      const double gj = static_cast<double>(g[j]) + wd_ * w[j];
      m[j] = static_cast<float>(b1_ * m[j] + (1.0 - b1_) * gj);
      v[j] = static_cast<float>(b2_ * v[j] + (1.0 - b2_) * gj * gj);
      const double mhat = m[j] / c1;
      const double vhat = v[j] / c2;
      w[j] = static_cast<float>(w[j] - lr * mhat / (std::sqrt(vhat) + eps_));
    }
  }
}

double grad_norm(const nn::ParamStore<float>& ps) {
  double s = 0;
  for (const auto& p : ps.params()) {
    if (!p.trainable) continue;
    for (std::size_t j = 0; j < p.grad.size(); ++j) s += static_cast<double>(p.grad[j]) * p.grad[j];
  }
  return std::sqrt(s);
}

double clip_gradients(nn::ParamStore<float>& ps, double max_norm) {
  const double norm = grad_norm(ps);
  if (!(norm > max_norm)) return norm;
  const double scale = max_norm / (norm + 1e-6);
  for (auto& p : ps.params()) {
    if (!p.trainable) continue;
    for (std::size_t j = 0; j < p.grad.size(); ++j) p.grad[j] = static_cast<float>(p.grad[j] * scale);
  }
  return grad_norm(ps);
}

std::string TrainLog::csv() const {
  std::ostringstream out;
  for (std::size_t i = 0; i < columns.size(); ++i) out << (i ? "," : "") << columns[i];
  out << '\n';
  char buf[64];
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i == 0)
        std::snprintf(buf, sizeof(buf), "%ld", static_cast<long>(row[i]));
      else
        std::snprintf(buf, sizeof(buf), "%.9g", row[i]);
      out << (i ? "," : "") << buf;
    }
    out << '\n';
  }
  return out.str();
}

std::vector<double> TrainLog::column(const std::string& name) const {
  std::size_t c = 0;
  while (c < columns.size() && columns[c] != name) ++c;
  if (c == columns.size()) throw Error(ErrorCode::BadParams, "no log column " + name);
  std::vector<double> out;
  for (const auto& r : rows) out.push_back(r[c]);
  return out;
}

TrainResult train_base(const PairedDataset& data, const TrainConfig& cfg, const StepCallback& on_step) {
  data.validate(cfg.model);
  ThreadScope threads(cfg.deterministic);
  TideModel<float> model(cfg.model, false);
  model.initialize(cfg.seed);
  const RandomConvFeatures<float> feat;
  auto step_fn = [&](const std::vector<int>& idx) {
    const ag::Var<float> img = batch_var(data.inputs, idx);
    const ag::Var<float> ref = batch_var(data.targets, idx);
    const auto out = model.forward_base(img);
    const auto loss = stage1_total(out.initial, ref, out.hyps, out.maps, img, cfg.loss_weights, feat);
    loss.total.backward();
    model.params().collect_grads();
    return std::vector<double>{value(loss.total),     value(loss.l1),          value(loss.ssim),
                               value(loss.perceptual), value(loss.diversity),  value(loss.consistency),
                               value(loss.aux)};
  };
  TrainResult r;
  r.log = run_loop(data, cfg, model,
                   {"total", "l1", "ssim", "perceptual", "diversity", "consistency", "aux"}, step_fn, on_step);
  r.checkpoint = make_checkpoint(model, Phase::Base, static_cast<std::int64_t>(r.log.rows.size()), cfg.seed);
  return r;
}

TrainResult train_refine(const PairedDataset& data, const Checkpoint& base, const TrainConfig& cfg,
                         const StepCallback& on_step) {
  if (base.phase != Phase::Base || base.has_refinement())
    throw Error(ErrorCode::PhaseMismatch, "refinement training needs a base-phase checkpoint, got phase " +
                                              std::string(to_string(base.phase)));
  data.validate(base.model);
  ThreadScope threads(cfg.deterministic);
  TideModel<float> model(base.model, true);
  model.initialize(cfg.seed);
  load_into(base, model);
  model.params().set_trainable("base.", false);

  // The frozen first stage gives the same J1 at every step, so it is
  // computed once per image.
  std::vector<Image> initial;
  {
    ag::NoGradGuard guard;
    for (const auto& im : data.inputs) {
      const auto out = model.forward_base(ag::Var<float>(im.tensor()));
      initial.emplace_back(out.initial.value().clone());
    }
  }
  const RandomConvFeatures<float> feat;
  auto step_fn = [&](const std::vector<int>& idx) {
    const ag::Var<float> img = batch_var(data.inputs, idx);
    const ag::Var<float> ref = batch_var(data.targets, idx);
    const ag::Var<float> init = batch_var(initial, idx);
    const auto out = model.forward_refine(img, init);
    const auto loss = stage2_total(out.fusion.final, init, ref, out.fusion.fused, cfg.loss_weights, feat);
    loss.total.backward();
    model.params().collect_grads();
    return std::vector<double>{value(loss.total),      value(loss.l1),        value(loss.ssim),
                               value(loss.perceptual), value(loss.magnitude), value(loss.improvement)};
  };
  TrainResult r;
  r.log = run_loop(data, cfg, model, {"total", "l1", "ssim", "perceptual", "magnitude", "improvement"}, step_fn,
                   on_step);
  r.checkpoint = make_checkpoint(model, Phase::Refine, static_cast<std::int64_t>(r.log.rows.size()), cfg.seed);
  return r;
}

template <typename T>
CombinedLoss<T> combined_objective(TideModel<T>& model, const ag::Var<T>& img, const ag::Var<T>& ref,
                                   const LossWeights& w, const FeatureExtractor<T>& feat) {
  CombinedLoss<T> c;
  const auto base = model.forward_base(img);
  c.stage1 = stage1_total(base.initial, ref, base.hyps, base.maps, img, w, feat);
  const auto refine = model.forward_refine(img, base.initial);
  // The improvement hinge compares against J1 as a fixed baseline.
  const ag::Var<T> baseline(base.initial.value());
  c.stage2 = stage2_total(refine.fusion.final, baseline, ref, refine.fusion.fused, w, feat);
  c.total = ag::mul_scalar(c.stage1.total, static_cast<T>(w.base_combined)) +
            ag::mul_scalar(c.stage2.total, static_cast<T>(w.refine_combined));
  return c;
}

TrainResult train_combined(const PairedDataset& data, const Checkpoint& full, const TrainConfig& cfg,
                           const StepCallback& on_step) {
  if (full.phase == Phase::Base || !full.has_refinement())
    throw Error(ErrorCode::PhaseMismatch, "combined training needs a checkpoint with both stages");
  data.validate(full.model);
  ThreadScope threads(cfg.deterministic);
  TideModel<float> model(full.model, true);
  model.initialize(cfg.seed);
  load_into(full, model);
  const RandomConvFeatures<float> feat;
  auto step_fn = [&](const std::vector<int>& idx) {
    const ag::Var<float> img = batch_var(data.inputs, idx);
    const ag::Var<float> ref = batch_var(data.targets, idx);
    const auto loss = combined_objective(model, img, ref, cfg.loss_weights, feat);
    loss.total.backward();
    model.params().collect_grads();
    return std::vector<double>{value(loss.total), value(loss.stage1.total), value(loss.stage2.total)};
  };
  TrainResult r;
  r.log = run_loop(data, cfg, model, {"total", "stage1", "stage2"}, step_fn, on_step);
  r.checkpoint =
      make_checkpoint(model, Phase::Combined, full.step + static_cast<std::int64_t>(r.log.rows.size()), cfg.seed);
  return r;
}

template CombinedLoss<float> combined_objective(TideModel<float>&, const ag::Var<float>&, const ag::Var<float>&,
                                                const LossWeights&, const FeatureExtractor<float>&);
template CombinedLoss<double> combined_objective(TideModel<double>&, const ag::Var<double>&, const ag::Var<double>&,
                                                 const LossWeights&, const FeatureExtractor<double>&);

Restorer::Restorer(const Checkpoint& ckpt)
    : model_(std::make_unique<TideModel<float>>(ckpt.model, ckpt.has_refinement())) {
  load_into(ckpt, *model_);
  for (const auto& p : model_->params().params())
    if (!ckpt.find(p.name)) throw Error(ErrorCode::ConfigMismatch, "checkpoint lacks " + p.name);
}

RestorationResult Restorer::restore(const Image& img) {
  validate_image(img, model_->config().n_down);
  ag::NoGradGuard guard;
  const ag::Var<float> x(img.tensor());
  const auto base = model_->forward_base(x);
  RestorationResult r;
  r.initial = base.initial.value();
  r.maps = base.maps.value();
  for (const auto& h : base.hyps) r.hypotheses.push_back(h.value());
  r.fusion_weights = base.weights.value();
  if (!model_->has_refinement()) {
    r.final = r.initial.clone();
    return r;
  }
  const auto ref = model_->forward_refine(x, base.initial);
  r.refined = true;
  r.final = ref.fusion.final.value();
  r.residual_maps = ref.residual.value();
  for (const auto& c : ref.corrections) r.corrections.push_back(c.value());
  r.gate = ref.fusion.gate.value();
  r.fused_correction = ref.fusion.fused.value();
  auto& ps = model_->params();
  for (int k = 0; k < model_->config().k_types; ++k) r.expert_scales.push_back(ps.at(model_->expert(k).scale_id()).value[0]);
  r.global_scale = ps.at(model_->gate().scale_id()).value[0];
  r.alpha = ps.at(model_->residual_estimator().alpha_id()).value[0];
  return r;
}

Tensor<float> Restorer::restore_batch(const Tensor<float>& batch) {
  validate_image_tensor(batch, model_->config().n_down);
  ag::NoGradGuard guard;
  const ag::Var<float> x(batch);
  const auto base = model_->forward_base(x);
  if (!model_->has_refinement()) return base.initial.value().clone();
  return model_->forward_refine(x, base.initial).fusion.final.value();
}

RestorationResult restore(const Image& img, const Checkpoint& ckpt) {
  Restorer r(ckpt);
  return r.restore(img);
}

}  // namespace tide
