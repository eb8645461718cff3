#include "tide/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>
#include <utility>

#include "tide/kernels.hpp"

namespace tide::ag {

namespace {

thread_local bool g_grad_enabled = true;

template <typename T>
bool wants_graph(std::initializer_list<const Var<T>*> inputs) {
  if (!g_grad_enabled) return false;
  for (const Var<T>* v : inputs)
    if (v->defined() && v->requires_grad()) return true;
  return false;
}

// Wraps an op result. The backward closure is stored only when some input
// needs a gradient.
template <typename T, typename Fn>
Var<T> finish(Tensor<T> value, std::initializer_list<const Var<T>*> inputs, Fn&& backward) {
  auto node = std::make_shared<Node<T>>();
  node->value = std::move(value);
  if (wants_graph<T>(inputs)) {
    node->requires_grad = true;
    // Every input is retained: closures read input values even for inputs
    // that need no gradient.
    for (const Var<T>* v : inputs)
      if (v->defined()) node->parents.push_back(v->ptr());
    node->backward = std::forward<Fn>(backward);
  }
  return Var<T>::from_node(std::move(node));
}

template <typename T>
T* grad_of(Node<T>* n) {
  return (n && n->requires_grad) ? n->grad_buffer().data() : nullptr;
}

struct Strides {
  long n, c, h, w;
};

Strides broadcast_strides(const Shape& s, const Shape& out) {
  auto ok = [](int d, int o) { return d == o || d == 1; };
  if (!ok(s.n, out.n) || !ok(s.c, out.c) || !ok(s.h, out.h) || !ok(s.w, out.w))
    throw Error(ErrorCode::BadShape, "cannot broadcast " + s.str() + " to " + out.str());
  Strides st;
  st.w = s.w == 1 ? 0 : 1;
  st.h = s.h == 1 ? 0 : s.w;
  st.c = s.c == 1 ? 0 : static_cast<long>(s.h) * s.w;
  st.n = s.n == 1 ? 0 : static_cast<long>(s.c) * s.h * s.w;
  return st;
}

Shape broadcast_shape(const Shape& a, const Shape& b) {
  auto dim = [](int x, int y) {
    if (x == y || y == 1) return x;
    if (x == 1) return y;
    return -1;
  };
  Shape s{dim(a.n, b.n), dim(a.c, b.c), dim(a.h, b.h), dim(a.w, b.w)};
  if (s.n < 0 || s.c < 0 || s.h < 0 || s.w < 0)
    throw Error(ErrorCode::BadShape, "incompatible shapes " + a.str() + " and " + b.str());
  return s;
}

// Visits every output element with the matching flat indices of a and b.
template <typename F>
void broadcast_for_each(const Shape& out, const Strides& sa, const Strides& sb, F&& f) {
  long io = 0;
  for (int n = 0; n < out.n; ++n) {
    for (int c = 0; c < out.c; ++c) {
      for (int y = 0; y < out.h; ++y) {
        long ia = n * sa.n + c * sa.c + y * sa.h;
        long ib = n * sb.n + c * sb.c + y * sb.h;
        for (int x = 0; x < out.w; ++x, ++io, ia += sa.w, ib += sb.w) f(ia, ib, io);
      }
    }
  }
}

// Forward value, then partial derivatives with respect to a and b.
template <typename T, typename Fwd, typename Da, typename Db>
Var<T> binary(const Var<T>& a, const Var<T>& b, Fwd fwd, Da da, Db db) {
  const Shape out_shape = broadcast_shape(a.shape(), b.shape());
  const Strides sa = broadcast_strides(a.shape(), out_shape);
  const Strides sb = broadcast_strides(b.shape(), out_shape);
  Tensor<T> out(out_shape);
  const T* pa = a.value().data();
  const T* pb = b.value().data();
  T* po = out.data();
  if (a.shape() == out_shape && b.shape() == out_shape) {
    const std::size_t n = out.size();
    for (std::size_t i = 0; i < n; ++i) po[i] = fwd(pa[i], pb[i]);
  } else {
    broadcast_for_each(out_shape, sa, sb, [&](long ia, long ib, long io) { po[io] = fwd(pa[ia], pb[ib]); });
  }
  return finish<T>(std::move(out), {&a, &b},
                   [an = a.node(), bn = b.node(), out_shape, sa, sb, da, db](Node<T>& self) {
                     const T* ga = self.grad.data();
                     const T* va = an->value.data();
                     const T* vb = bn->value.data();
                     const T* vo = self.value.data();
                     T* gA = grad_of(an);
                     T* gB = grad_of(bn);
                     broadcast_for_each(out_shape, sa, sb, [&](long ia, long ib, long io) {
                       if (gA) gA[ia] += ga[io] * da(va[ia], vb[ib], vo[io]);
                       if (gB) gB[ib] += ga[io] * db(va[ia], vb[ib], vo[io]);
                     });
                   });
}

// Elementwise unary op with derivative expressed through input and output.
template <typename T, typename Fwd, typename Deriv>
Var<T> unary(const Var<T>& x, Fwd fwd, Deriv deriv) {
  Tensor<T> out(x.shape());
  const T* px = x.value().data();
  T* po = out.data();
  const std::size_t n = out.size();
  for (std::size_t i = 0; i < n; ++i) po[i] = fwd(px[i]);
  return finish<T>(std::move(out), {&x}, [xn = x.node(), deriv](Node<T>& self) {
    T* gx = grad_of(xn);
    if (!gx) return;
    const T* go = self.grad.data();
    const T* vx = xn->value.data();
    const T* vo = self.value.data();
    const std::size_t n = self.value.size();
    for (std::size_t i = 0; i < n; ++i) gx[i] += go[i] * deriv(vx[i], vo[i]);
  });
}

}  // namespace

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }
bool grad_enabled() { return g_grad_enabled; }

template <typename T>
Var<T>::Var(Tensor<T> value, bool requires_grad) : node_(std::make_shared<Node<T>>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

template <typename T>
void Var<T>::backward() const {
  if (!node_ || node_->value.size() != 1) throw Error(ErrorCode::BadShape, "backward() needs a single-element output");
  if (!node_->requires_grad) return;
  // Iterative post-order DFS yields a topological order.
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  std::vector<std::pair<Node<T>*, std::size_t>> stack{{node_.get(), 0}};
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, i] = stack.back();
    if (i < n->parents.size()) {
      Node<T>* p = n->parents[i++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }
  node_->grad_buffer().fill(T(1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* n = *it;
    if (n->backward && !n->grad.empty()) n->backward(*n);
  }
}

// ---------------------------------------------------------------- structural

template <typename T>
Var<T> concat(std::span<const Var<T>> parts) {
  std::vector<Tensor<T>> values;
  values.reserve(parts.size());
  for (const auto& p : parts) values.push_back(p.value());
  Tensor<T> out = tide::concat_channels<T>(values);

  auto node = std::make_shared<Node<T>>();
  node->value = std::move(out);
  bool req = false;
  if (g_grad_enabled)
    for (const auto& p : parts) req = req || p.requires_grad();
  if (req) {
    node->requires_grad = true;
    std::vector<Node<T>*> ins;
    for (const auto& p : parts) {
      ins.push_back(p.node());
      node->parents.push_back(p.ptr());
    }
    node->backward = [ins](Node<T>& self) {
      const Shape& s = self.value.shape();
      const std::size_t plane = s.plane();
      for (int n = 0; n < s.n; ++n) {
        int offset = 0;
        for (Node<T>* in : ins) {
          const int c = in->value.c();
          if (T* g = grad_of(in)) {
            const T* src = self.grad.plane(n, offset);
            T* dst = g + static_cast<std::size_t>(n) * c * plane;
            for (std::size_t i = 0; i < plane * c; ++i) dst[i] += src[i];
          }
          offset += c;
        }
      }
    };
  }
  return Var<T>::from_node(std::move(node));
}

template <typename T>
Var<T> concat(const Var<T>& a, const Var<T>& b) {
  const Var<T> parts[2] = {a, b};
  return concat<T>(std::span<const Var<T>>(parts, 2));
}

template <typename T>
Var<T> slice_channels(const Var<T>& x, int start, int count) {
  Tensor<T> out = tide::slice_channels(x.value(), start, count);
  return finish<T>(std::move(out), {&x}, [xn = x.node(), start, count](Node<T>& self) {
    T* g = grad_of(xn);
    if (!g) return;
    const Shape& s = xn->value.shape();
    const std::size_t len = s.plane() * count;
    for (int n = 0; n < s.n; ++n) {
      const T* src = self.grad.plane(n, 0);
      T* dst = g + xn->value.index(n, start, 0, 0);
      for (std::size_t i = 0; i < len; ++i) dst[i] += src[i];
    }
  });
}

// ------------------------------------------------------- conv / normalization

template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, int stride, int groups) {
  const Shape& xs = x.shape();
  const Shape& ws = weight.shape();
  if (groups < 1 || ws.n % groups != 0 || ws.c * groups != xs.c)
    throw Error(ErrorCode::ChannelMismatch,
                "conv input " + xs.str() + " incompatible with weight " + ws.str() + " groups " + std::to_string(groups));
  if (ws.h != ws.w || ws.h % 2 == 0) throw Error(ErrorCode::BadShape, "conv kernel must be square and odd");
  if (bias.defined() && static_cast<int>(bias.value().size()) != ws.n)
    throw Error(ErrorCode::ChannelMismatch, "bias length does not match output channels");
  kernels::ConvGeometry g{xs.n, xs.c, xs.h, xs.w, ws.n, ws.h, stride, groups};
  if (g.out_h() < 1 || g.out_w() < 1) throw Error(ErrorCode::BadShape, "conv output would be empty for " + xs.str());
  Tensor<T> y(Shape{xs.n, ws.n, g.out_h(), g.out_w()});
  kernels::conv2d_forward<T>(g, x.value().data(), weight.value().data(),
                             bias.defined() ? bias.value().data() : nullptr, y.data());
  return finish<T>(std::move(y), {&x, &weight, &bias},
                   [xn = x.node(), wn = weight.node(), bn = bias.node(), g](Node<T>& self) {
                     kernels::conv2d_backward<T>(g, xn->value.data(), wn->value.data(), self.grad.data(), grad_of(xn),
                                                 grad_of(wn), grad_of(bn));
                   });
}

template <typename T>
Var<T> instance_norm(const Var<T>& x, T eps) {
  const Shape& s = x.shape();
  const std::size_t plane = s.plane();
  if (plane == 1) {
    return finish<T>(x.value(), {&x}, [xn = x.node()](Node<T>& self) {
      if (T* g = grad_of(xn))
        for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    });
  }
  Tensor<T> y(s);
  Tensor<T> inv_std(Shape{s.n, s.c, 1, 1});
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      const T* px = x.value().plane(n, c);
      double mean = 0;
      for (std::size_t i = 0; i < plane; ++i) mean += px[i];
      mean /= static_cast<double>(plane);
      double var = 0;
      for (std::size_t i = 0; i < plane; ++i) var += (px[i] - mean) * (px[i] - mean);
      var /= static_cast<double>(plane);
      const double inv = 1.0 / std::sqrt(var + static_cast<double>(eps));
      inv_std.at(n, c, 0, 0) = static_cast<T>(inv);
      T* py = y.plane(n, c);
      for (std::size_t i = 0; i < plane; ++i) py[i] = static_cast<T>((px[i] - mean) * inv);
    }
  }
  return finish<T>(std::move(y), {&x}, [xn = x.node(), inv_std](Node<T>& self) {
    T* g = grad_of(xn);
    if (!g) return;
    const Shape& s = self.value.shape();
    const std::size_t plane = s.plane();
    for (int n = 0; n < s.n; ++n) {
      for (int c = 0; c < s.c; ++c) {
        const T* dy = self.grad.plane(n, c);
        const T* y = self.value.plane(n, c);
        double mdy = 0, mdyy = 0;
        for (std::size_t i = 0; i < plane; ++i) {
          mdy += dy[i];
          mdyy += static_cast<double>(dy[i]) * y[i];
        }
        mdy /= static_cast<double>(plane);
        mdyy /= static_cast<double>(plane);
        const double inv = inv_std.at(n, c, 0, 0);
        T* gx = g + xn->value.index(n, c, 0, 0);
        for (std::size_t i = 0; i < plane; ++i) gx[i] += static_cast<T>(inv * (dy[i] - mdy - y[i] * mdyy));
      }
    }
  });
}

namespace {
struct Tap {
  int i0, i1;
  double l;
};
std::vector<Tap> upsample_taps(int in, int out) {
  std::vector<Tap> taps(out);
  const double scale = static_cast<double>(in) / out;
  for (int o = 0; o < out; ++o) {
    double src = std::max(0.0, (o + 0.5) * scale - 0.5);
    int i0 = std::min(static_cast<int>(src), in - 1);
    int i1 = std::min(i0 + 1, in - 1);
    taps[o] = {i0, i1, src - i0};
  }
  return taps;
}
}  // namespace

template <typename T>
Var<T> upsample2x(const Var<T>& x) {
  const Shape& s = x.shape();
  const Shape os{s.n, s.c, s.h * 2, s.w * 2};
  auto ty = upsample_taps(s.h, os.h);
  auto tx = upsample_taps(s.w, os.w);
  Tensor<T> out(os);
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      const T* src = x.value().plane(n, c);
      T* dst = out.plane(n, c);
      for (int oy = 0; oy < os.h; ++oy) {
        const Tap& a = ty[oy];
        const T* r0 = src + a.i0 * s.w;
        const T* r1 = src + a.i1 * s.w;
        for (int ox = 0; ox < os.w; ++ox) {
          const Tap& b = tx[ox];
          const double top = (1 - b.l) * r0[b.i0] + b.l * r0[b.i1];
          const double bot = (1 - b.l) * r1[b.i0] + b.l * r1[b.i1];
          dst[oy * os.w + ox] = static_cast<T>((1 - a.l) * top + a.l * bot);
        }
      }
    }
  }
  return finish<T>(std::move(out), {&x}, [xn = x.node(), ty, tx](Node<T>& self) {
    T* g = grad_of(xn);
    if (!g) return;
    const Shape& s = xn->value.shape();
    const Shape& os = self.value.shape();
    for (int n = 0; n < s.n; ++n) {
      for (int c = 0; c < s.c; ++c) {
        const T* go = self.grad.plane(n, c);
        T* gi = g + xn->value.index(n, c, 0, 0);
        for (int oy = 0; oy < os.h; ++oy) {
          const Tap& a = ty[oy];
          for (int ox = 0; ox < os.w; ++ox) {
            const Tap& b = tx[ox];
            const T v = go[oy * os.w + ox];
            gi[a.i0 * s.w + b.i0] += static_cast<T>((1 - a.l) * (1 - b.l) * v);
            gi[a.i0 * s.w + b.i1] += static_cast<T>((1 - a.l) * b.l * v);
            gi[a.i1 * s.w + b.i0] += static_cast<T>(a.l * (1 - b.l) * v);
            gi[a.i1 * s.w + b.i1] += static_cast<T>(a.l * b.l * v);
          }
        }
      }
    }
  });
}

template <typename T>
Var<T> global_avg_pool(const Var<T>& x) {
  const Shape& s = x.shape();
  const std::size_t plane = s.plane();
  Tensor<T> out(Shape{s.n, s.c, 1, 1});
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c) {
      const T* p = x.value().plane(n, c);
      double acc = 0;
      for (std::size_t i = 0; i < plane; ++i) acc += p[i];
      out.at(n, c, 0, 0) = static_cast<T>(acc / static_cast<double>(plane));
    }
  return finish<T>(std::move(out), {&x}, [xn = x.node()](Node<T>& self) {
    T* g = grad_of(xn);
    if (!g) return;
    const Shape& s = xn->value.shape();
    const std::size_t plane = s.plane();
    for (int n = 0; n < s.n; ++n)
      for (int c = 0; c < s.c; ++c) {
        const T v = self.grad.at(n, c, 0, 0) / static_cast<T>(plane);
        T* gp = g + xn->value.index(n, c, 0, 0);
        for (std::size_t i = 0; i < plane; ++i) gp[i] += v;
      }
  });
}

template <typename T>
Var<T> gaussian_blur_valid(const Var<T>& x, int window, double sigma) {
  const Shape& s = x.shape();
  if (s.h < window || s.w < window)
    throw Error(ErrorCode::TooSmall, "image " + s.str() + " smaller than window " + std::to_string(window));
  std::vector<double> k(window);
  double total = 0;
  const int half = window / 2;
  for (int i = 0; i < window; ++i) {
    k[i] = std::exp(-static_cast<double>((i - half) * (i - half)) / (2 * sigma * sigma));
    total += k[i];
  }
  for (auto& v : k) v /= total;
  const int oh = s.h - window + 1, ow = s.w - window + 1;
  Tensor<T> out(Shape{s.n, s.c, oh, ow});
  std::vector<double> tmp(static_cast<std::size_t>(s.h) * ow);
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c) {
      const T* src = x.value().plane(n, c);
      for (int y = 0; y < s.h; ++y)
        for (int ox = 0; ox < ow; ++ox) {
          double acc = 0;
          for (int i = 0; i < window; ++i) acc += k[i] * src[y * s.w + ox + i];
          tmp[y * ow + ox] = acc;
        }
      T* dst = out.plane(n, c);
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
          double acc = 0;
          for (int i = 0; i < window; ++i) acc += k[i] * tmp[(oy + i) * ow + ox];
          dst[oy * ow + ox] = static_cast<T>(acc);
        }
    }
  return finish<T>(std::move(out), {&x}, [xn = x.node(), k, window](Node<T>& self) {
    T* g = grad_of(xn);
    if (!g) return;
    const Shape& s = xn->value.shape();
    const int oh = self.value.h(), ow = self.value.w();
    std::vector<double> tmp(static_cast<std::size_t>(s.h) * ow);
    for (int n = 0; n < s.n; ++n)
      for (int c = 0; c < s.c; ++c) {
        std::fill(tmp.begin(), tmp.end(), 0.0);
        const T* go = self.grad.plane(n, c);
        for (int oy = 0; oy < oh; ++oy)
          for (int ox = 0; ox < ow; ++ox) {
            const double v = go[oy * ow + ox];
            for (int i = 0; i < window; ++i) tmp[(oy + i) * ow + ox] += k[i] * v;
          }
        T* gi = g + xn->value.index(n, c, 0, 0);
        for (int y = 0; y < s.h; ++y)
          for (int ox = 0; ox < ow; ++ox) {
            const double v = tmp[y * ow + ox];
            for (int i = 0; i < window; ++i) gi[y * s.w + ox + i] += static_cast<T>(k[i] * v);
          }
      }
  });
}

// ----------------------------------------------------------------- pointwise

template <typename T>
Var<T> leaky_relu(const Var<T>& x, T slope) {
  return unary<T>(
      x, [slope](T v) { return v >= T(0) ? v : slope * v; },
      [slope](T v, T) { return v >= T(0) ? T(1) : slope; });
}

template <typename T>
Var<T> relu(const Var<T>& x) {
  return unary<T>(
      x, [](T v) { return v > T(0) ? v : T(0); }, [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

template <typename T>
Var<T> sigmoid(const Var<T>& x) {
  return unary<T>(
      x, [](T v) { return T(1) / (T(1) + std::exp(-v)); }, [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Var<T> tanh(const Var<T>& x) {
  return unary<T>(
      x, [](T v) { return std::tanh(v); }, [](T, T y) { return T(1) - y * y; });
}

template <typename T>
Var<T> abs(const Var<T>& x) {
  return unary<T>(
      x, [](T v) { return std::abs(v); },
      [](T v, T) { return v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0)); });
}

template <typename T>
Var<T> sqrt(const Var<T>& x) {
  return unary<T>(
      x, [](T v) { return std::sqrt(v); }, [](T, T y) { return y > T(0) ? T(0.5) / y : T(0); });
}

template <typename T>
Var<T> clamp01(const Var<T>& x) {
  return unary<T>(
      x, [](T v) { return std::min(std::max(v, T(0)), T(1)); },
      [](T v, T) { return (v >= T(0) && v <= T(1)) ? T(1) : T(0); });
}

template <typename T>
Var<T> add_scalar(const Var<T>& x, T c) {
  return unary<T>(
      x, [c](T v) { return v + c; }, [](T, T) { return T(1); });
}

template <typename T>
Var<T> mul_scalar(const Var<T>& x, T c) {
  return unary<T>(
      x, [c](T v) { return v * c; }, [c](T, T) { return c; });
}

// ------------------------------------------------------------------- binary

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  return binary<T>(
      a, b, [](T x, T y) { return x + y; }, [](T, T, T) { return T(1); }, [](T, T, T) { return T(1); });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  return binary<T>(
      a, b, [](T x, T y) { return x - y; }, [](T, T, T) { return T(1); }, [](T, T, T) { return T(-1); });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  return binary<T>(
      a, b, [](T x, T y) { return x * y; }, [](T, T y, T) { return y; }, [](T x, T, T) { return x; });
}

template <typename T>
Var<T> div(const Var<T>& a, const Var<T>& b) {
  return binary<T>(
      a, b, [](T x, T y) { return x / y; }, [](T, T y, T) { return T(1) / y; },
      [](T, T y, T o) { return -o / y; });
}

// --------------------------------------------------------------- reductions

template <typename T>
Var<T> sum_all(const Var<T>& x) {
  double acc = 0;
  for (std::size_t i = 0; i < x.value().size(); ++i) acc += x.value()[i];
  return finish<T>(Tensor<T>::scalar(static_cast<T>(acc)), {&x}, [xn = x.node()](Node<T>& self) {
    T* g = grad_of(xn);
    if (!g) return;
    const T v = self.grad[0];
    for (std::size_t i = 0; i < xn->value.size(); ++i) g[i] += v;
  });
}

template <typename T>
Var<T> mean_all(const Var<T>& x) {
  return mul_scalar(sum_all(x), T(1) / static_cast<T>(x.value().size()));
}

template <typename T>
Var<T> sum_per_sample(const Var<T>& x) {
  const Shape& s = x.shape();
  const std::size_t len = s.numel() / s.n;
  Tensor<T> out(Shape{s.n, 1, 1, 1});
  for (int n = 0; n < s.n; ++n) {
    double acc = 0;
    const T* p = x.value().data() + n * len;
    for (std::size_t i = 0; i < len; ++i) acc += p[i];
    out[n] = static_cast<T>(acc);
  }
  return finish<T>(std::move(out), {&x}, [xn = x.node(), len](Node<T>& self) {
    T* g = grad_of(xn);
    if (!g) return;
    for (int n = 0; n < xn->value.n(); ++n)
      for (std::size_t i = 0; i < len; ++i) g[n * len + i] += self.grad[n];
  });
}

template <typename T>
Var<T> sum_channels(const Var<T>& x) {
  const Shape& s = x.shape();
  const std::size_t plane = s.plane();
  Tensor<T> out(Shape{s.n, 1, s.h, s.w});
  for (int n = 0; n < s.n; ++n) {
    T* dst = out.plane(n, 0);
    for (int c = 0; c < s.c; ++c) {
      const T* src = x.value().plane(n, c);
      for (std::size_t i = 0; i < plane; ++i) dst[i] += src[i];
    }
  }
  return finish<T>(std::move(out), {&x}, [xn = x.node()](Node<T>& self) {
    T* g = grad_of(xn);
    if (!g) return;
    const Shape& s = xn->value.shape();
    const std::size_t plane = s.plane();
    for (int n = 0; n < s.n; ++n) {
      const T* go = self.grad.plane(n, 0);
      for (int c = 0; c < s.c; ++c) {
        T* gp = g + xn->value.index(n, c, 0, 0);
        for (std::size_t i = 0; i < plane; ++i) gp[i] += go[i];
      }
    }
  });
}

template <typename T>
Var<T> softmax_channels(const Var<T>& x) {
  const Shape& s = x.shape();
  const std::size_t plane = s.plane();
  Tensor<T> out(s);
  for (int n = 0; n < s.n; ++n) {
    for (std::size_t i = 0; i < plane; ++i) {
      T mx = x.value().plane(n, 0)[i];
      for (int c = 1; c < s.c; ++c) mx = std::max(mx, x.value().plane(n, c)[i]);
      T total = 0;
      for (int c = 0; c < s.c; ++c) {
        const T e = std::exp(x.value().plane(n, c)[i] - mx);
        out.plane(n, c)[i] = e;
        total += e;
      }
      for (int c = 0; c < s.c; ++c) out.plane(n, c)[i] /= total;
    }
  }
  return finish<T>(std::move(out), {&x}, [xn = x.node()](Node<T>& self) {
    T* g = grad_of(xn);
    if (!g) return;
    const Shape& s = self.value.shape();
    const std::size_t plane = s.plane();
    for (int n = 0; n < s.n; ++n) {
      for (std::size_t i = 0; i < plane; ++i) {
        T dot = 0;
        for (int c = 0; c < s.c; ++c) dot += self.grad.plane(n, c)[i] * self.value.plane(n, c)[i];
        for (int c = 0; c < s.c; ++c) {
          const T y = self.value.plane(n, c)[i];
          g[xn->value.index(n, c, 0, 0) + i] += y * (self.grad.plane(n, c)[i] - dot);
        }
      }
    }
  });
}

template <typename T>
Var<T> minmax_normalize(const Var<T>& x, T eps) {
  const Shape& s = x.shape();
  const std::size_t len = s.numel() / s.n;
  Tensor<T> out(s);
  std::vector<std::size_t> arg_min(s.n), arg_max(s.n);
  std::vector<T> range(s.n);
  for (int n = 0; n < s.n; ++n) {
    const T* p = x.value().data() + n * len;
    std::size_t lo = 0, hi = 0;
    for (std::size_t i = 1; i < len; ++i) {
      if (p[i] < p[lo]) lo = i;
      if (p[i] > p[hi]) hi = i;
    }
    arg_min[n] = lo;
    arg_max[n] = hi;
    range[n] = p[hi] - p[lo];
    T* o = out.data() + n * len;
    if (range[n] > eps)
      for (std::size_t i = 0; i < len; ++i) o[i] = (p[i] - p[lo]) / range[n];
  }
  return finish<T>(std::move(out), {&x}, [xn = x.node(), len, arg_min, arg_max, range, eps](Node<T>& self) {
    T* g = grad_of(xn);
    if (!g) return;
    for (int n = 0; n < xn->value.n(); ++n) {
      const T r = range[n];
      if (!(r > eps)) continue;
      const T* go = self.grad.data() + n * len;
      const T* y = self.value.data() + n * len;
      T* gx = g + n * len;
      T d_min = 0, d_max = 0;
      for (std::size_t i = 0; i < len; ++i) {
        gx[i] += go[i] / r;
        d_min += go[i] * (y[i] - T(1)) / r;
        d_max -= go[i] * y[i] / r;
      }
      gx[arg_min[n]] += d_min;
      gx[arg_max[n]] += d_max;
    }
  });
}

#define TIDE_INSTANTIATE(T)                                                       \
  template class Var<T>;                                                          \
  template Var<T> concat(std::span<const Var<T>>);                                \
  template Var<T> concat(const Var<T>&, const Var<T>&);                           \
  template Var<T> slice_channels(const Var<T>&, int, int);                        \
  template Var<T> conv2d(const Var<T>&, const Var<T>&, const Var<T>&, int, int);  \
  template Var<T> instance_norm(const Var<T>&, T);                                \
  template Var<T> upsample2x(const Var<T>&);                                      \
  template Var<T> global_avg_pool(const Var<T>&);                                 \
  template Var<T> gaussian_blur_valid(const Var<T>&, int, double);                \
  template Var<T> leaky_relu(const Var<T>&, T);                                   \
  template Var<T> relu(const Var<T>&);                                            \
  template Var<T> sigmoid(const Var<T>&);                                         \
  template Var<T> tanh(const Var<T>&);                                            \
  template Var<T> abs(const Var<T>&);                                             \
  template Var<T> sqrt(const Var<T>&);                                            \
  template Var<T> clamp01(const Var<T>&);                                         \
  template Var<T> add_scalar(const Var<T>&, T);                                   \
  template Var<T> mul_scalar(const Var<T>&, T);                                   \
  template Var<T> add(const Var<T>&, const Var<T>&);                              \
  template Var<T> sub(const Var<T>&, const Var<T>&);                              \
  template Var<T> mul(const Var<T>&, const Var<T>&);                              \
  template Var<T> div(const Var<T>&, const Var<T>&);                              \
  template Var<T> sum_all(const Var<T>&);                                         \
  template Var<T> mean_all(const Var<T>&);                                        \
  template Var<T> sum_per_sample(const Var<T>&);                                  \
  template Var<T> sum_channels(const Var<T>&);                                    \
  template Var<T> softmax_channels(const Var<T>&);                                \
  template Var<T> minmax_normalize(const Var<T>&, T);

TIDE_INSTANTIATE(float)
TIDE_INSTANTIATE(double)

#undef TIDE_INSTANTIATE

}  // namespace tide::ag
