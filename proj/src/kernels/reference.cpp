// Serial reference kernels. Straight loops, no blocking; the oracle for the
// optimized versions in gemm.cpp / conv.cpp.

#include "tide/kernels.hpp"

namespace tide::kernels::reference {

template <typename T>
void gemm_nn(int m, int n, int k, const T* a, int lda, const T* b, int ldb, T* c, int ldc, bool accumulate) {
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      T s = 0;
      for (int kk = 0; kk < k; ++kk) s += a[i * lda + kk] * b[kk * ldb + j];
      c[i * ldc + j] = accumulate ? c[i * ldc + j] + s : s;
    }
  }
}

template <typename T>
void gemm_nt(int m, int n, int k, const T* a, int lda, const T* b, int ldb, T* c, int ldc, bool accumulate) {
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      T s = 0;
      for (int kk = 0; kk < k; ++kk) s += a[i * lda + kk] * b[j * ldb + kk];
      c[i * ldc + j] = accumulate ? c[i * ldc + j] + s : s;
    }
  }
}

template <typename T>
void conv2d_forward(const ConvGeometry& g, const T* x, const T* w, const T* bias, T* y) {
  const int oh = g.out_h(), ow = g.out_w(), k = g.kernel, pad = g.pad();
  const int ipg = g.in_per_group(), opg = g.out_per_group();
  for (int n = 0; n < g.batch; ++n) {
    for (int o = 0; o < g.out_c; ++o) {
      const int gi = o / opg;
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
          T s = bias ? bias[o] : T(0);
          for (int ci = 0; ci < ipg; ++ci) {
            const int c = gi * ipg + ci;
            for (int ky = 0; ky < k; ++ky) {
              const int iy = oy * g.stride - pad + ky;
              if (iy < 0 || iy >= g.in_h) continue;
              for (int kx = 0; kx < k; ++kx) {
                const int ix = ox * g.stride - pad + kx;
                if (ix < 0 || ix >= g.in_w) continue;
                s += w[((o * ipg + ci) * k + ky) * k + kx] * x[((n * g.in_c + c) * g.in_h + iy) * g.in_w + ix];
              }
            }
          }
          y[((n * g.out_c + o) * oh + oy) * ow + ox] = s;
        }
      }
    }
  }
}

template <typename T>
void conv2d_backward(const ConvGeometry& g, const T* x, const T* w, const T* dy, T* dx, T* dw, T* db) {
  const int oh = g.out_h(), ow = g.out_w(), k = g.kernel, pad = g.pad();
  const int ipg = g.in_per_group(), opg = g.out_per_group();
  for (int n = 0; n < g.batch; ++n) {
    for (int o = 0; o < g.out_c; ++o) {
      const int gi = o / opg;
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
          const T d = dy[((n * g.out_c + o) * oh + oy) * ow + ox];
          if (db) db[o] += d;
          for (int ci = 0; ci < ipg; ++ci) {
            const int c = gi * ipg + ci;
            for (int ky = 0; ky < k; ++ky) {
              const int iy = oy * g.stride - pad + ky;
              if (iy < 0 || iy >= g.in_h) continue;
              for (int kx = 0; kx < k; ++kx) {
                const int ix = ox * g.stride - pad + kx;
                if (ix < 0 || ix >= g.in_w) continue;
                const int wi = ((o * ipg + ci) * k + ky) * k + kx;
                const int xi = ((n * g.in_c + c) * g.in_h + iy) * g.in_w + ix;
                if (dw) dw[wi] += d * x[xi];
                if (dx) dx[xi] += d * w[wi];
              }
            }
          }
        }
      }
    }
  }
}

template void gemm_nn<float>(int, int, int, const float*, int, const float*, int, float*, int, bool);
template void gemm_nn<double>(int, int, int, const double*, int, const double*, int, double*, int, bool);
template void gemm_nt<float>(int, int, int, const float*, int, const float*, int, float*, int, bool);
template void gemm_nt<double>(int, int, int, const double*, int, const double*, int, double*, int, bool);
template void conv2d_forward<float>(const ConvGeometry&, const float*, const float*, const float*, float*);
template void conv2d_forward<double>(const ConvGeometry&, const double*, const double*, const double*, double*);
template void conv2d_backward<float>(const ConvGeometry&, const float*, const float*, const float*, float*, float*,
                                     float*);
template void conv2d_backward<double>(const ConvGeometry&, const double*, const double*, const double*, double*,
                                      double*, double*);

}  // namespace tide::kernels::reference
