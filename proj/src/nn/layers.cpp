#include "tide/layers.hpp"

#include <cmath>
#include <random>

namespace tide::nn {

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

bool is_base_param(const std::string& name) { return name.rfind("base.", 0) == 0; }
bool is_refine_param(const std::string& name) { return name.rfind("refine.", 0) == 0; }

template <typename T>
int ParamStore<T>::add(const std::string& name, Shape shape, Init init, int fan_in, double init_value) {
  if (index_.count(name)) throw Error(ErrorCode::ConfigMismatch, "duplicate parameter " + name);
  Param<T> p;
  p.name = name;
  p.shape = shape;
  p.init = init;
  p.fan_in = fan_in;
  p.init_value = init_value;
  if (allocate_) {
    p.value = Tensor<T>(shape, init == Init::Constant ? static_cast<T>(init_value) : T(0));
    p.grad = Tensor<T>(shape);
  }
  const int id = static_cast<int>(params_.size());
  index_.emplace(name, id);
  params_.push_back(std::move(p));
  return id;
}

template <typename T>
void ParamStore<T>::initialize(std::uint64_t seed, double negative_slope) {
  if (!allocate_) return;
  for (auto& p : params_) {
    switch (p.init) {
      case Init::Zero: p.value.fill(T(0)); break;
      case Init::Constant: p.value.fill(static_cast<T>(p.init_value)); break;
      case Init::Kaiming: {
        std::mt19937_64 rng(seed ^ fnv1a(p.name));
        const double stddev = std::sqrt(2.0 / ((1.0 + negative_slope * negative_slope) * std::max(1, p.fan_in)));
        std::normal_distribution<double> dist(0.0, stddev);
        for (std::size_t i = 0; i < p.value.size(); ++i) p.value[i] = static_cast<T>(dist(rng));
        break;
      }
    }
  }
}

template <typename T>
ag::Var<T> ParamStore<T>::var(int id) {
  if (id < 0) return {};
  Param<T>& p = params_.at(id);
  const bool track = p.trainable && ag::grad_enabled();
  ag::Var<T> leaf(p.value, track);
  if (track) live_.emplace_back(id, leaf);
  return leaf;
}

template <typename T>
void ParamStore<T>::collect_grads() {
  for (auto& [id, leaf] : live_) {
    const Tensor<T>& g = leaf.grad();
    if (g.empty()) continue;
    Tensor<T>& dst = params_[id].grad;
    for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
  }
  live_.clear();
}

template <typename T>
void ParamStore<T>::zero_grads() {
  for (auto& p : params_)
    if (!p.grad.empty()) p.grad.fill(T(0));
}

template <typename T>
int ParamStore<T>::find(const std::string& name) const {
  auto it = index_.find(name);
  return it == index_.end() ? -1 : it->second;
}

template <typename T>
void ParamStore<T>::set_trainable(const std::string& prefix, bool trainable) {
  for (auto& p : params_)
    if (p.name.rfind(prefix, 0) == 0) p.trainable = trainable;
}

template <typename T>
std::size_t ParamStore<T>::count(const std::string& prefix) const {
  std::size_t total = 0;
  for (const auto& p : params_)
    if (p.name.rfind(prefix, 0) == 0) total += p.shape.numel();
  return total;
}

template <typename T>
template <typename U>
void ParamStore<T>::copy_from(const ParamStore<U>& other) {
  for (auto& p : params_) {
    const int id = other.find(p.name);
    if (id < 0) throw Error(ErrorCode::ConfigMismatch, "parameter " + p.name + " missing in source");
    const auto& src = other.at(id);
    if (!(src.shape == p.shape)) throw Error(ErrorCode::ConfigMismatch, "shape mismatch for " + p.name);
    for (std::size_t i = 0; i < p.value.size(); ++i) p.value[i] = static_cast<T>(src.value[i]);
  }
}

// -------------------------------------------------------------------- layers

template <typename T>
Conv<T>::Conv(ParamStore<T>& ps, const std::string& name, int in_c, int out_c, int kernel, int stride, int groups,
              bool bias)
    : ps_(&ps), in_c_(in_c), out_c_(out_c), stride_(stride), groups_(groups) {
  if (groups < 1 || in_c % groups != 0 || out_c % groups != 0)
    throw Error(ErrorCode::ChannelMismatch, name + ": channels not divisible by groups");
  const int fan_in = (in_c / groups) * kernel * kernel;
  w_ = ps.add(join(name, "weight"), Shape{out_c, in_c / groups, kernel, kernel}, Init::Kaiming, fan_in);
  if (bias) b_ = ps.add(join(name, "bias"), Shape{out_c, 1, 1, 1}, Init::Zero);
}

template <typename T>
ag::Var<T> Conv<T>::operator()(const ag::Var<T>& x) const {
  if (x.shape().c != in_c_)
    throw Error(ErrorCode::ChannelMismatch,
                "expected " + std::to_string(in_c_) + " input channels, got " + std::to_string(x.shape().c));
  return ag::conv2d(x, ps_->var(w_), ps_->var(b_), stride_, groups_);
}

template <typename T>
ConvBlock<T>::ConvBlock(ParamStore<T>& ps, const std::string& name, int in_c, int out_c, double slope, Options opt)
    : conv_(ps, name, in_c, out_c, opt.kernel, opt.stride, opt.groups, true),
      norm_(opt.norm),
      activate_(opt.activate),
      slope_(static_cast<T>(slope)) {}

template <typename T>
ag::Var<T> ConvBlock<T>::operator()(const ag::Var<T>& x) const {
  ag::Var<T> y = conv_(x);
  if (norm_) y = ag::instance_norm(y);
  if (activate_) y = ag::leaky_relu(y, slope_);
  return y;
}

template <typename T>
ResidualBranch<T>::ResidualBranch(ParamStore<T>& ps, const std::string& name, int channels, double slope)
    : a_(ps, join(name, "conv1"), channels, channels, slope),
      b_(ps, join(name, "conv2"), channels, channels, slope, {.norm = true, .activate = false}) {}

template <typename T>
ag::Var<T> ResidualBranch<T>::operator()(const ag::Var<T>& x) const {
  return b_(a_(x));
}

template <typename T>
ChannelGate<T>::ChannelGate(ParamStore<T>& ps, const std::string& name, int channels, int hidden)
    : squeeze_(ps, join(name, "squeeze"), channels, hidden, 1),
      excite_(ps, join(name, "excite"), hidden, channels, 1) {}

template <typename T>
ag::Var<T> ChannelGate<T>::scale(const ag::Var<T>& x) const {
  return ag::sigmoid(excite_(ag::relu(squeeze_(ag::global_avg_pool(x)))));
}

template <typename T>
ag::Var<T> ChannelGate<T>::operator()(const ag::Var<T>& x) const {
  return x * scale(x);
}

template class ParamStore<float>;
template class ParamStore<double>;
template void ParamStore<float>::copy_from(const ParamStore<float>&);
template void ParamStore<float>::copy_from(const ParamStore<double>&);
template void ParamStore<double>::copy_from(const ParamStore<float>&);
template void ParamStore<double>::copy_from(const ParamStore<double>&);
template class Conv<float>;
template class Conv<double>;
template class ConvBlock<float>;
template class ConvBlock<double>;
template class ResidualBranch<float>;
template class ResidualBranch<double>;
template class ChannelGate<float>;
template class ChannelGate<double>;

}  // namespace tide::nn
