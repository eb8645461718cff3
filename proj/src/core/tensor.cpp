#include "tide/tensor.hpp"

#include <sstream>

namespace tide {

std::string Shape::str() const {
  std::ostringstream os;
  os << n << 'x' << c << 'x' << h << 'x' << w;
  return os.str();
}

template <typename T>
Tensor<T> stack(std::span<const Tensor<T>> items) {
  if (items.empty()) throw Error(ErrorCode::BadShape, "stack of zero tensors");
  Shape s = items[0].shape();
  for (const auto& t : items) {
    if (t.n() != 1 || t.c() != s.c || t.h() != s.h || t.w() != s.w)
      throw Error(ErrorCode::BadShape, "stack expects equal 1xCxHxW tensors, got " + t.shape().str());
  }
  Shape out_shape{static_cast<int>(items.size()), s.c, s.h, s.w};
  Tensor<T> out(out_shape);
  const std::size_t len = s.numel();
  for (std::size_t i = 0; i < items.size(); ++i) std::copy_n(items[i].data(), len, out.data() + i * len);
  return out;
}

template <typename T>
Tensor<T> concat_channels(std::span<const Tensor<T>> items) {
  if (items.empty()) throw Error(ErrorCode::BadShape, "concat of zero tensors");
  const Shape s0 = items[0].shape();
  int channels = 0;
  for (const auto& t : items) {
    if (t.n() != s0.n || t.h() != s0.h || t.w() != s0.w)
      throw Error(ErrorCode::BadShape, "concat extent mismatch " + t.shape().str() + " vs " + s0.str());
    channels += t.c();
  }
  Tensor<T> out(Shape{s0.n, channels, s0.h, s0.w});
  const std::size_t plane = s0.plane();
  for (int n = 0; n < s0.n; ++n) {
    int offset = 0;
    for (const auto& t : items) {
      std::copy_n(t.plane(n, 0), plane * t.c(), out.plane(n, offset));
      offset += t.c();
    }
  }
  return out;
}

template <typename T>
Tensor<T> slice_channels(const Tensor<T>& t, int start, int count) {
  if (start < 0 || count <= 0 || start + count > t.c())
    throw Error(ErrorCode::BadShape, "channel slice out of range for " + t.shape().str());
  Tensor<T> out(Shape{t.n(), count, t.h(), t.w()});
  const std::size_t plane = t.shape().plane();
  for (int n = 0; n < t.n(); ++n) std::copy_n(t.plane(n, start), plane * count, out.plane(n, 0));
  return out;
}

template Tensor<float> stack(std::span<const Tensor<float>>);
template Tensor<double> stack(std::span<const Tensor<double>>);
template Tensor<float> concat_channels(std::span<const Tensor<float>>);
template Tensor<double> concat_channels(std::span<const Tensor<double>>);
template Tensor<float> slice_channels(const Tensor<float>&, int, int);
template Tensor<double> slice_channels(const Tensor<double>&, int, int);

}  // namespace tide
