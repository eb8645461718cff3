#include <algorithm>
#include <cstring>
#include <vector>

#include "tide/kernels.hpp"

namespace tide::kernels {

namespace {

// Unfold channels [c0, c0+cn) of one sample into rows of length out_h*out_w,
// row index (c, ky, kx).
template <typename T>
void im2col(const ConvGeometry& g, const T* x, int c0, int cn, T* col) {
  const int oh = g.out_h(), ow = g.out_w(), k = g.kernel, s = g.stride, pad = g.pad();
  const int rows = cn * k * k;
#pragma omp parallel for schedule(static)
  for (int r = 0; r < rows; ++r) {
    const int c = r / (k * k);
    const int ky = (r / k) % k;
    const int kx = r % k;
    const T* src = x + static_cast<long>(c0 + c) * g.in_h * g.in_w;
    T* dst = col + static_cast<long>(r) * oh * ow;
    for (int oy = 0; oy < oh; ++oy) {
      const int iy = oy * s - pad + ky;
      T* drow = dst + oy * ow;
      if (iy < 0 || iy >= g.in_h) {
        std::fill_n(drow, ow, T(0));
        continue;
      }
      const T* srow = src + iy * g.in_w;
      if (s == 1) {
        const int lo = std::max(0, pad - kx);
        const int hi = std::min(ow, g.in_w + pad - kx);
        std::fill_n(drow, lo, T(0));
        if (hi > lo) std::memcpy(drow + lo, srow + lo - pad + kx, sizeof(T) * (hi - lo));
        std::fill_n(drow + std::max(hi, lo), ow - std::max(hi, lo), T(0));
      } else {
        for (int ox = 0; ox < ow; ++ox) {
          const int ix = ox * s - pad + kx;
          drow[ox] = (ix >= 0 && ix < g.in_w) ? srow[ix] : T(0);
        }
      }
    }
  }
}

// Adjoint of im2col: accumulate rows back into channels [c0, c0+cn).
template <typename T>
void col2im_add(const ConvGeometry& g, const T* col, int c0, int cn, T* dx) {
  const int oh = g.out_h(), ow = g.out_w(), k = g.kernel, s = g.stride, pad = g.pad();
#pragma omp parallel for schedule(static)
  for (int c = 0; c < cn; ++c) {
    T* dst = dx + static_cast<long>(c0 + c) * g.in_h * g.in_w;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const T* src = col + (static_cast<long>(c) * k * k + ky * k + kx) * oh * ow;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * s - pad + ky;
          if (iy < 0 || iy >= g.in_h) continue;
          T* drow = dst + iy * g.in_w;
          const T* srow = src + oy * ow;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * s - pad + kx;
            if (ix >= 0 && ix < g.in_w) drow[ix] += srow[ox];
          }
        }
      }
    }
  }
}

template <typename T>
std::vector<T>& col_buffer() {
  thread_local std::vector<T> buf;
  return buf;
}

template <typename T>
std::vector<T>& aux_buffer() {
  thread_local std::vector<T> buf;
  return buf;
}

template <typename T>
std::vector<T>& dyt_buffer() {
  thread_local std::vector<T> buf;
  return buf;
}

template <typename T>
std::vector<T>& dwt_buffer() {
  thread_local std::vector<T> buf;
  return buf;
}

// rows x cols -> cols x rows, in 32x32 blocks.
template <typename T>
void transpose(const T* src, int rows, int cols, T* dst) {
  constexpr int B = 32;
  for (int r0 = 0; r0 < rows; r0 += B)
    for (int c0 = 0; c0 < cols; c0 += B)
      for (int r = r0; r < std::min(rows, r0 + B); ++r)
        for (int c = c0; c < std::min(cols, c0 + B); ++c)
          dst[static_cast<long>(c) * rows + r] = src[static_cast<long>(r) * cols + c];
}

// Output-channel count from which the weight gradient uses the transposed form.
constexpr int kWideOutputs = 16;

bool is_pointwise(const ConvGeometry& g) { return g.kernel == 1 && g.stride == 1; }

}  // namespace

template <typename T>
void conv2d_forward(const ConvGeometry& g, const T* x, const T* w, const T* bias, T* y) {
  const int ipg = g.in_per_group(), opg = g.out_per_group();
  const int flen = g.filter_len();
  const long out_plane = static_cast<long>(g.out_h()) * g.out_w();
  const long in_plane = static_cast<long>(g.in_h) * g.in_w;
  auto& col = col_buffer<T>();
  if (!is_pointwise(g)) col.resize(static_cast<std::size_t>(flen) * out_plane);

  for (int n = 0; n < g.batch; ++n) {
    const T* xn = x + n * g.in_c * in_plane;
    T* yn = y + n * g.out_c * out_plane;
    for (int gi = 0; gi < g.groups; ++gi) {
      const T* b;
      if (is_pointwise(g)) {
        b = xn + gi * ipg * in_plane;
      } else {
        im2col(g, xn, gi * ipg, ipg, col.data());
        b = col.data();
      }
      T* yg = yn + gi * opg * out_plane;
      if (bias) {
        for (int o = 0; o < opg; ++o) std::fill_n(yg + o * out_plane, out_plane, bias[gi * opg + o]);
      }
      gemm_nn<T>(opg, static_cast<int>(out_plane), flen, w + static_cast<long>(gi) * opg * flen, flen, b,
                 static_cast<int>(out_plane), yg, static_cast<int>(out_plane), bias != nullptr);
    }
  }
}

template <typename T>
void conv2d_backward(const ConvGeometry& g, const T* x, const T* w, const T* dy, T* dx, T* dw, T* db) {
  const int ipg = g.in_per_group(), opg = g.out_per_group();
  const int flen = g.filter_len();
  const long out_plane = static_cast<long>(g.out_h()) * g.out_w();
  const long in_plane = static_cast<long>(g.in_h) * g.in_w;
  const bool pointwise = is_pointwise(g);
  auto& col = col_buffer<T>();
  col.resize(static_cast<std::size_t>(flen) * out_plane);
  // Transposed filters per group: [flen][opg].
  auto& wt = aux_buffer<T>();
  if (dx) {
    wt.resize(static_cast<std::size_t>(g.groups) * flen * opg);
    for (int gi = 0; gi < g.groups; ++gi)
      for (int o = 0; o < opg; ++o)
        for (int f = 0; f < flen; ++f)
          wt[(static_cast<std::size_t>(gi) * flen + f) * opg + o] = w[(static_cast<long>(gi) * opg + o) * flen + f];
  }

  for (int n = 0; n < g.batch; ++n) {
    const T* xn = x + n * g.in_c * in_plane;
    const T* dyn = dy + n * g.out_c * out_plane;
    for (int gi = 0; gi < g.groups; ++gi) {
      const T* dyg = dyn + gi * opg * out_plane;
      if (db) {
        for (int o = 0; o < opg; ++o) {
          T s = 0;
          const T* row = dyg + o * out_plane;
          for (long i = 0; i < out_plane; ++i) s += row[i];
          db[gi * opg + o] += s;
        }
      }
      if (dw) {
        const T* b;
        if (pointwise) {
          b = xn + gi * ipg * in_plane;
        } else {
          im2col(g, xn, gi * ipg, ipg, col.data());
          b = col.data();
        }
        T* dwg = dw + static_cast<long>(gi) * opg * flen;
        if (opg >= kWideOutputs) {
          // dW^T = col * dY^T keeps the long pixel axis as the inner product
          // dimension of the faster row-panel kernel.
          auto& dyt = dyt_buffer<T>();
          auto& dwt = dwt_buffer<T>();
          dyt.resize(static_cast<std::size_t>(out_plane) * opg);
          dwt.resize(static_cast<std::size_t>(flen) * opg);
          transpose(dyg, opg, static_cast<int>(out_plane), dyt.data());
          gemm_nn<T>(flen, opg, static_cast<int>(out_plane), b, static_cast<int>(out_plane), dyt.data(), opg,
                     dwt.data(), opg, false);
          for (int o = 0; o < opg; ++o)
            for (int f = 0; f < flen; ++f) dwg[static_cast<long>(o) * flen + f] += dwt[static_cast<std::size_t>(f) * opg + o];
        } else {
          gemm_nt<T>(opg, flen, static_cast<int>(out_plane), dyg, static_cast<int>(out_plane), b,
                     static_cast<int>(out_plane), dwg, flen, true);
        }
      }
      if (dx) {
        T* dxn = dx + n * g.in_c * in_plane;
        const T* wg = wt.data() + static_cast<std::size_t>(gi) * flen * opg;
        if (pointwise) {
          gemm_nn<T>(flen, static_cast<int>(out_plane), opg, wg, opg, dyg, static_cast<int>(out_plane),
                     dxn + gi * ipg * in_plane, static_cast<int>(out_plane), true);
        } else {
          gemm_nn<T>(flen, static_cast<int>(out_plane), opg, wg, opg, dyg, static_cast<int>(out_plane), col.data(),
                     static_cast<int>(out_plane), false);
          col2im_add(g, col.data(), gi * ipg, ipg, dxn);
        }
      }
    }
  }
}

template void conv2d_forward<float>(const ConvGeometry&, const float*, const float*, const float*, float*);
template void conv2d_forward<double>(const ConvGeometry&, const double*, const double*, const double*, double*);
template void conv2d_backward<float>(const ConvGeometry&, const float*, const float*, const float*, float*, float*,
                                     float*);
template void conv2d_backward<double>(const ConvGeometry&, const double*, const double*, const double*, double*,
                                      double*, double*);

}  // namespace tide::kernels
