#pragma once

#include <algorithm>
#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "tide/error.hpp"

namespace tide {

/// NCHW extent. Every tensor in the library is four-dimensional; scalars are
/// 1x1x1x1 and per-channel vectors are 1xCx1x1.
struct Shape {
  int n = 1;
  int c = 1;
  int h = 1;
  int w = 1;

  std::size_t numel() const {
    return static_cast<std::size_t>(n) * c * h * w;
  }
  std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

/// Dense channels-first tensor with shared storage. Copies are shallow; use
/// clone() for an independent buffer.
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape s, T fill = T(0))
      : shape_(s), buf_(std::make_shared<std::vector<T>>(s.numel(), fill)) {}
  Tensor(Shape s, std::vector<T> values) : shape_(s), buf_(std::make_shared<std::vector<T>>(std::move(values))) {
    if (buf_->size() != s.numel()) throw Error(ErrorCode::BadShape, "value count does not match " + s.str());
  }

  static Tensor scalar(T v) { return Tensor(Shape{1, 1, 1, 1}, v); }

  const Shape& shape() const { return shape_; }
  int n() const { return shape_.n; }
  int c() const { return shape_.c; }
  int h() const { return shape_.h; }
  int w() const { return shape_.w; }
  std::size_t size() const { return buf_ ? buf_->size() : 0; }
  bool empty() const { return size() == 0; }

  T* data() { return buf_->data(); }
  const T* data() const { return buf_->data(); }
  std::span<T> span() { return {buf_->data(), buf_->size()}; }
  std::span<const T> span() const { return {buf_->data(), buf_->size()}; }

  T& operator[](std::size_t i) { return (*buf_)[i]; }
  const T& operator[](std::size_t i) const { return (*buf_)[i]; }

  std::size_t index(int n, int c, int y, int x) const {
    return ((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h + y) * shape_.w + x;
  }
  T& at(int n, int c, int y, int x) { return (*buf_)[index(n, c, y, x)]; }
  const T& at(int n, int c, int y, int x) const { return (*buf_)[index(n, c, y, x)]; }

  /// Pointer to the start of channel plane (n, c).
  T* plane(int n, int c) { return data() + index(n, c, 0, 0); }
  const T* plane(int n, int c) const { return data() + index(n, c, 0, 0); }

  Tensor clone() const {
    Tensor t;
    t.shape_ = shape_;
    t.buf_ = std::make_shared<std::vector<T>>(*buf_);
    return t;
  }

  void fill(T v) { std::fill(buf_->begin(), buf_->end(), v); }

  /// Same storage viewed under a different shape with equal element count.
  Tensor reshaped(Shape s) const {
    if (s.numel() != shape_.numel()) throw Error(ErrorCode::BadShape, "cannot reshape " + shape_.str() + " to " + s.str());
    Tensor t = *this;
    t.shape_ = s;
    return t;
  }

  /// Copy of batch element i as a 1xCxHxW tensor.
  Tensor sample(int i) const {
    Tensor t(Shape{1, shape_.c, shape_.h, shape_.w});
    const std::size_t len = t.size();
    std::copy_n(data() + static_cast<std::size_t>(i) * len, len, t.data());
    return t;
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> t(shape_);
    std::transform(buf_->begin(), buf_->end(), t.data(), [](T v) { return static_cast<U>(v); });
    return t;
  }

  bool bit_equal(const Tensor& o) const {
    return shape_ == o.shape_ && std::equal(buf_->begin(), buf_->end(), o.buf_->begin());
  }

 private:
  Shape shape_{0, 0, 0, 0};
  std::shared_ptr<std::vector<T>> buf_;
};

/// Stack 1xCxHxW tensors along the batch axis.
template <typename T>
Tensor<T> stack(std::span<const Tensor<T>> items);

/// Concatenate along channels, all inputs sharing N, H, W.
template <typename T>
Tensor<T> concat_channels(std::span<const Tensor<T>> items);

/// Channels [start, start+count) of every batch element.
template <typename T>
Tensor<T> slice_channels(const Tensor<T>& t, int start, int count);

}  // namespace tide
