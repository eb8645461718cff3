#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "tide/autograd.hpp"

namespace tide::nn {

enum class Init {
  Kaiming,   // N(0, 2 / ((1 + slope^2) * fan_in))
  Zero,
  Constant,  // init_value
};

template <typename T>
struct Param {
  std::string name;
  Shape shape;
  Init init = Init::Zero;
  double init_value = 0.0;
  int fan_in = 1;
  bool trainable = true;
  Tensor<T> value;
  Tensor<T> grad;
};

/// Owns every learnable tensor of a model, addressed by stable integer ids
/// and dotted names. Parameters named "base.*" belong to the first stage,
/// "refine.*" to the second.
template <typename T>
class ParamStore {
 public:
  /// A non-allocating store only records shapes (used for counting the
  /// full-size network without materializing it).
  explicit ParamStore(bool allocate = true) : allocate_(allocate) {}

  int add(const std::string& name, Shape shape, Init init, int fan_in = 1, double init_value = 0.0);

  /// Draws initial values. Each tensor gets its own stream derived from the
  /// seed and its name, so adding modules never perturbs existing ones.
  void initialize(std::uint64_t seed, double negative_slope);

  /// Graph leaf for parameter `id`. While gradients are enabled and the
  /// parameter is trainable the leaf is recorded so collect_grads() can
  /// gather its gradient after backward().
  ag::Var<T> var(int id);

  /// Adds gradients of all leaves handed out since the last call into
  /// Param::grad and forgets the leaves.
  void collect_grads();
  void zero_grads();
  void release_leaves() { live_.clear(); }

  std::vector<Param<T>>& params() { return params_; }
  const std::vector<Param<T>>& params() const { return params_; }
  Param<T>& at(int id) { return params_.at(id); }
  const Param<T>& at(int id) const { return params_.at(id); }
  int find(const std::string& name) const;
  bool allocated() const { return allocate_; }

  /// Marks parameters whose name starts with `prefix` trainable or frozen.
  void set_trainable(const std::string& prefix, bool trainable);
  std::size_t count(const std::string& prefix = "") const;

  /// Copies values by name from another store (any scalar type). Names and
  /// shapes must match exactly.
  template <typename U>
  void copy_from(const ParamStore<U>& other);

 private:
  bool allocate_;
  std::vector<Param<T>> params_;
  std::unordered_map<std::string, int> index_;
  std::vector<std::pair<int, ag::Var<T>>> live_;
};

bool is_base_param(const std::string& name);
bool is_refine_param(const std::string& name);

/// Square convolution with "same" padding.
template <typename T>
class Conv {
 public:
  Conv() = default;
  Conv(ParamStore<T>& ps, const std::string& name, int in_c, int out_c, int kernel = 3, int stride = 1,
       int groups = 1, bool bias = true);
  ag::Var<T> operator()(const ag::Var<T>& x) const;

  int weight_id() const { return w_; }
  int bias_id() const { return b_; }
  int in_channels() const { return in_c_; }
  int out_channels() const { return out_c_; }

 private:
  ParamStore<T>* ps_ = nullptr;
  int w_ = -1;
  int b_ = -1;
  int in_c_ = 0;
  int out_c_ = 0;
  int stride_ = 1;
  int groups_ = 1;
};

/// conv -> optional instance norm -> optional leaky ReLU.
template <typename T>
class ConvBlock {
 public:
  struct Options {
    int kernel = 3;
    int stride = 1;
    int groups = 1;
    bool norm = true;
    bool activate = true;
  };
  ConvBlock() = default;
  ConvBlock(ParamStore<T>& ps, const std::string& name, int in_c, int out_c, double slope, Options opt);
  ConvBlock(ParamStore<T>& ps, const std::string& name, int in_c, int out_c, double slope)
      : ConvBlock(ps, name, in_c, out_c, slope, Options{}) {}
  ag::Var<T> operator()(const ag::Var<T>& x) const;
  const Conv<T>& conv() const { return conv_; }

 private:
  Conv<T> conv_;
  bool norm_ = true;
  bool activate_ = true;
  T slope_ = T(0.2);
};

/// Inner path of a residual block: conv-norm-act then conv-norm.
template <typename T>
class ResidualBranch {
 public:
  ResidualBranch() = default;
  ResidualBranch(ParamStore<T>& ps, const std::string& name, int channels, double slope);
  ag::Var<T> operator()(const ag::Var<T>& x) const;
  const ConvBlock<T>& first() const { return a_; }
  const ConvBlock<T>& second() const { return b_; }

 private:
  ConvBlock<T> a_;
  ConvBlock<T> b_;
};

/// x + branch(x).
template <typename T>
class ResidualBlock {
 public:
  ResidualBlock() = default;
  ResidualBlock(ParamStore<T>& ps, const std::string& name, int channels, double slope)
      : branch_(ps, name, channels, slope) {}
  ag::Var<T> operator()(const ag::Var<T>& x) const { return x + branch_(x); }
  const ResidualBranch<T>& branch() const { return branch_; }

 private:
  ResidualBranch<T> branch_;
};

/// Channel gating on pooled descriptors: x * sigmoid(W2 relu(W1 gap(x))).
/// Serves as the global-context block and the colour decoder attention.
template <typename T>
class ChannelGate {
 public:
  ChannelGate() = default;
  ChannelGate(ParamStore<T>& ps, const std::string& name, int channels, int hidden);
  ag::Var<T> operator()(const ag::Var<T>& x) const;
  /// The per-channel factors alone, Nx C x1x1.
  ag::Var<T> scale(const ag::Var<T>& x) const;
  const Conv<T>& squeeze() const { return squeeze_; }
  const Conv<T>& excite() const { return excite_; }

 private:
  Conv<T> squeeze_;
  Conv<T> excite_;
};

/// Helper for naming nested parameters.
inline std::string join(const std::string& scope, const std::string& leaf) {
  return scope.empty() ? leaf : scope + "." + leaf;
}

}  // namespace tide::nn
