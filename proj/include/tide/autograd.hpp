#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "tide/tensor.hpp"

// Reverse-mode differentiation over NCHW tensors.
//
// A Var is a handle to a graph node. Ops record a backward closure only when
// some input requires a gradient and no NoGradGuard is active, so inference
// allocates no graph. The graph lives as long as the handles to its output.

namespace tide::ag {

template <typename T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  Tensor<T>& grad_buffer() {
    if (grad.empty()) grad = Tensor<T>(value.shape());
    return grad;
  }
};

template <typename T>
class Var {
 public:
  Var() = default;
  explicit Var(Tensor<T> value, bool requires_grad = false);

  const Tensor<T>& value() const { return node_->value; }
  /// Accumulated gradient; an empty tensor when nothing flowed here.
  const Tensor<T>& grad() const { return node_->grad; }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  const Shape& shape() const { return node_->value.shape(); }
  bool defined() const { return static_cast<bool>(node_); }

  /// Seeds d(this)/d(this) = 1 (this must be a single element) and
  /// propagates to every reachable node.
  void backward() const;

  Node<T>* node() const { return node_.get(); }
  const std::shared_ptr<Node<T>>& ptr() const { return node_; }
  static Var from_node(std::shared_ptr<Node<T>> n) {
    Var v;
    v.node_ = std::move(n);
    return v;
  }

 private:
  std::shared_ptr<Node<T>> node_;
};

/// Disables graph construction on this thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};
bool grad_enabled();

// ---- structural ----
template <typename T>
Var<T> concat(std::span<const Var<T>> parts);
template <typename T>
Var<T> concat(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> slice_channels(const Var<T>& x, int start, int count);

// ---- convolution and normalization ----
/// `bias` may be an undefined Var. Padding is kernel/2.
template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, int stride, int groups);
/// Per-sample, per-channel normalization without affine terms. 1x1 planes
/// pass through unchanged.
template <typename T>
Var<T> instance_norm(const Var<T>& x, T eps = T(1e-5));
/// Bilinear 2x upsampling with half-pixel centers and edge clamping.
template <typename T>
Var<T> upsample2x(const Var<T>& x);
/// Global average pool to NxCx1x1.
template <typename T>
Var<T> global_avg_pool(const Var<T>& x);
/// Separable Gaussian filter over each channel, valid region only.
template <typename T>
Var<T> gaussian_blur_valid(const Var<T>& x, int window, double sigma);

// ---- pointwise ----
template <typename T>
Var<T> leaky_relu(const Var<T>& x, T slope);
template <typename T>
Var<T> relu(const Var<T>& x);
template <typename T>
Var<T> sigmoid(const Var<T>& x);
template <typename T>
Var<T> tanh(const Var<T>& x);
template <typename T>
Var<T> abs(const Var<T>& x);
template <typename T>
Var<T> sqrt(const Var<T>& x);
/// min(max(x,0),1); gradient passes where 0 <= x <= 1.
template <typename T>
Var<T> clamp01(const Var<T>& x);
template <typename T>
Var<T> add_scalar(const Var<T>& x, T c);
template <typename T>
Var<T> mul_scalar(const Var<T>& x, T c);

// ---- broadcasting binary ops (each dim equal or 1) ----
template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> div(const Var<T>& a, const Var<T>& b);

// ---- reductions ----
template <typename T>
Var<T> sum_all(const Var<T>& x);
template <typename T>
Var<T> mean_all(const Var<T>& x);
/// Nx1x1x1 sums over everything but the batch axis.
template <typename T>
Var<T> sum_per_sample(const Var<T>& x);
/// Nx1xHxW sum over channels.
template <typename T>
Var<T> sum_channels(const Var<T>& x);
/// Softmax across channels at every pixel.
template <typename T>
Var<T> softmax_channels(const Var<T>& x);
/// Per-sample min-max rescale to [0,1]; samples whose range is <= eps map to 0.
template <typename T>
Var<T> minmax_normalize(const Var<T>& x, T eps);

template <typename T>
Var<T> operator+(const Var<T>& a, const Var<T>& b) { return add(a, b); }
template <typename T>
Var<T> operator-(const Var<T>& a, const Var<T>& b) { return sub(a, b); }
template <typename T>
Var<T> operator*(const Var<T>& a, const Var<T>& b) { return mul(a, b); }
template <typename T>
Var<T> operator/(const Var<T>& a, const Var<T>& b) { return div(a, b); }

}  // namespace tide::ag
