#pragma once

// Dense compute kernels behind the autograd ops.
//
// Two implementations are kept with identical signatures:
//   tide::kernels             -- blocked, vectorized, OpenMP-parallel
//   tide::kernels::reference  -- plain serial loops used as the test oracle
//
// The parallel kernels partition work over independent outputs only, so
// results do not depend on the thread count.

namespace tide::kernels {

/// 2-D convolution with square kernel, "same" zero padding (kernel/2) and
/// optional stride and channel groups.
struct ConvGeometry {
  int batch = 1;
  int in_c = 1;
  int in_h = 1;
  int in_w = 1;
  int out_c = 1;
  int kernel = 3;
  int stride = 1;
  int groups = 1;

  int pad() const { return kernel / 2; }
  int out_h() const { return (in_h + 2 * pad() - kernel) / stride + 1; }
  int out_w() const { return (in_w + 2 * pad() - kernel) / stride + 1; }
  int in_per_group() const { return in_c / groups; }
  int out_per_group() const { return out_c / groups; }
  /// Elements in one filter: (in_c/groups) * kernel * kernel.
  int filter_len() const { return in_per_group() * kernel * kernel; }
};

/// C[MxN] (+)= A[MxK] * B[KxN], row-major with leading dimensions.
template <typename T>
void gemm_nn(int m, int n, int k, const T* a, int lda, const T* b, int ldb, T* c, int ldc, bool accumulate);

/// C[MxN] (+)= A[MxK] * B[NxK]^T.
template <typename T>
void gemm_nt(int m, int n, int k, const T* a, int lda, const T* b, int ldb, T* c, int ldc, bool accumulate);

/// y = conv(x, w) + bias. `bias` may be null. Weight layout is
/// [out_c][in_c/groups][kernel][kernel].
template <typename T>
void conv2d_forward(const ConvGeometry& g, const T* x, const T* w, const T* bias, T* y);

/// Accumulates (+=) into whichever of dx, dw, db are non-null.
template <typename T>
void conv2d_backward(const ConvGeometry& g, const T* x, const T* w, const T* dy, T* dx, T* dw, T* db);

void set_num_threads(int n);
int num_threads();

namespace reference {

template <typename T>
void gemm_nn(int m, int n, int k, const T* a, int lda, const T* b, int ldb, T* c, int ldc, bool accumulate);

template <typename T>
void gemm_nt(int m, int n, int k, const T* a, int lda, const T* b, int ldb, T* c, int ldc, bool accumulate);

template <typename T>
void conv2d_forward(const ConvGeometry& g, const T* x, const T* w, const T* bias, T* y);

template <typename T>
void conv2d_backward(const ConvGeometry& g, const T* x, const T* w, const T* dy, T* dx, T* dw, T* db);

}  // namespace reference
}  // namespace tide::kernels
