#include <algorithm>
#include <cstring>
#include <vector>

#include "tide/kernels.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace tide::kernels {

namespace {

constexpr int kVecBytes = 64;

template <typename T>
struct Simd {
  typedef T vec __attribute__((vector_size(kVecBytes)));
  static constexpr int lanes = kVecBytes / static_cast<int>(sizeof(T));

  static vec load(const T* p) {
    vec v;
    std::memcpy(&v, p, sizeof(vec));
    return v;
  }
  static void store(T* p, vec v) { std::memcpy(p, &v, sizeof(vec)); }
  static vec zero() { return vec{} ; }
  static T hsum(vec v) {
    T s = 0;
    for (int i = 0; i < lanes; ++i) s += v[i];
    return s;
  }
};

// Rows of C computed per microkernel call.
constexpr int kRowBlock = 6;

// MR rows x NV vectors of C, reading a packed B panel laid out [k][NV*lanes].
template <typename T, int MR, int NV>
inline void nn_micro(int k, const T* a, int lda, const T* panel, T* c, int ldc, bool accumulate) {
  using S = Simd<T>;
  using V = typename S::vec;
  constexpr int L = S::lanes;
  V acc[MR][NV];
  for (int r = 0; r < MR; ++r)
    for (int v = 0; v < NV; ++v) acc[r][v] = accumulate ? S::load(c + r * ldc + v * L) : S::zero();
  for (int kk = 0; kk < k; ++kk) {
    V b[NV];
    for (int v = 0; v < NV; ++v) b[v] = S::load(panel + kk * NV * L + v * L);
    for (int r = 0; r < MR; ++r) {
      const T av = a[r * lda + kk];
      for (int v = 0; v < NV; ++v) acc[r][v] += av * b[v];
    }
  }
  for (int r = 0; r < MR; ++r)
    for (int v = 0; v < NV; ++v) S::store(c + r * ldc + v * L, acc[r][v]);
}

template <typename T, int NV>
inline void nn_rows(int m, int k, const T* a, int lda, const T* panel, T* c, int ldc, bool accumulate) {
  int i = 0;
  for (; i + kRowBlock <= m; i += kRowBlock)
    nn_micro<T, kRowBlock, NV>(k, a + i * lda, lda, panel, c + i * ldc, ldc, accumulate);
  const T* ar = a + i * lda;
  T* cr = c + i * ldc;
  switch (m - i) {
    case 5: nn_micro<T, 5, NV>(k, ar, lda, panel, cr, ldc, accumulate); break;
    case 4: nn_micro<T, 4, NV>(k, ar, lda, panel, cr, ldc, accumulate); break;
    case 3: nn_micro<T, 3, NV>(k, ar, lda, panel, cr, ldc, accumulate); break;
    case 2: nn_micro<T, 2, NV>(k, ar, lda, panel, cr, ldc, accumulate); break;
    case 1: nn_micro<T, 1, NV>(k, ar, lda, panel, cr, ldc, accumulate); break;
    default: break;
  }
}

template <typename T>
std::vector<T>& scratch() {
  thread_local std::vector<T> buf;
  return buf;
}

// 4x4 tile of dot products over a K range.
template <typename T, int MR, int NR>
inline void nt_micro(int k, const T* a, int lda, const T* b, int ldb, T* c, int ldc, bool accumulate) {
  using S = Simd<T>;
  using V = typename S::vec;
  constexpr int L = S::lanes;
  V acc[MR][NR];
  for (int r = 0; r < MR; ++r)
    for (int q = 0; q < NR; ++q) acc[r][q] = S::zero();
  int kk = 0;
  for (; kk + L <= k; kk += L) {
    V av[MR];
    V bv[NR];
    for (int r = 0; r < MR; ++r) av[r] = S::load(a + r * lda + kk);
    for (int q = 0; q < NR; ++q) bv[q] = S::load(b + q * ldb + kk);
    for (int r = 0; r < MR; ++r)
      for (int q = 0; q < NR; ++q) acc[r][q] += av[r] * bv[q];
  }
  for (int r = 0; r < MR; ++r) {
    for (int q = 0; q < NR; ++q) {
      T s = S::hsum(acc[r][q]);
      for (int t = kk; t < k; ++t) s += a[r * lda + t] * b[q * ldb + t];
      T& dst = c[r * ldc + q];
      dst = accumulate ? dst + s : s;
    }
  }
}

template <typename T>
inline void nt_tile(int mr, int nr, int k, const T* a, int lda, const T* b, int ldb, T* c, int ldc, bool acc) {
  if (mr == 4 && nr == 4) return nt_micro<T, 4, 4>(k, a, lda, b, ldb, c, ldc, acc);
  // Edge tiles: one row at a time, up to 4 columns.
  for (int r = 0; r < mr; ++r) {
    switch (nr) {
      case 4: nt_micro<T, 1, 4>(k, a + r * lda, lda, b, ldb, c + r * ldc, ldc, acc); break;
      case 3: nt_micro<T, 1, 3>(k, a + r * lda, lda, b, ldb, c + r * ldc, ldc, acc); break;
      case 2: nt_micro<T, 1, 2>(k, a + r * lda, lda, b, ldb, c + r * ldc, ldc, acc); break;
      case 1: nt_micro<T, 1, 1>(k, a + r * lda, lda, b, ldb, c + r * ldc, ldc, acc); break;
      default: break;
    }
  }
}

}  // namespace

template <typename T>
void gemm_nn(int m, int n, int k, const T* a, int lda, const T* b, int ldb, T* c, int ldc, bool accumulate) {
  if (m <= 0 || n <= 0) return;
  if (k <= 0) {
    if (!accumulate)
      for (int i = 0; i < m; ++i) std::fill_n(c + static_cast<long>(i) * ldc, n, T(0));
    return;
  }
  constexpr int L = Simd<T>::lanes;
  constexpr int kPanel = 2 * L;
  const int full_panels = n / kPanel;

#pragma omp parallel for schedule(static)
  for (int p = 0; p < full_panels; ++p) {
    const int j0 = p * kPanel;
    auto& panel = scratch<T>();
    panel.resize(static_cast<std::size_t>(k) * kPanel);
    for (int kk = 0; kk < k; ++kk)
      std::memcpy(panel.data() + static_cast<std::size_t>(kk) * kPanel, b + static_cast<long>(kk) * ldb + j0,
                  sizeof(T) * kPanel);
    nn_rows<T, 2>(m, k, a, lda, panel.data(), c + j0, ldc, accumulate);
  }

  int j0 = full_panels * kPanel;
  if (n - j0 >= L) {
    auto& panel = scratch<T>();
    panel.resize(static_cast<std::size_t>(k) * L);
    for (int kk = 0; kk < k; ++kk)
      std::memcpy(panel.data() + static_cast<std::size_t>(kk) * L, b + static_cast<long>(kk) * ldb + j0, sizeof(T) * L);
    nn_rows<T, 1>(m, k, a, lda, panel.data(), c + j0, ldc, accumulate);
    j0 += L;
  }
  if (j0 < n) {
    // Remaining columns go through a zero-padded panel and a staging tile.
    const int rem = n - j0;
    auto& panel = scratch<T>();
    panel.assign(static_cast<std::size_t>(k) * L, T(0));
    for (int kk = 0; kk < k; ++kk)
      std::memcpy(panel.data() + static_cast<std::size_t>(kk) * L, b + static_cast<long>(kk) * ldb + j0, sizeof(T) * rem);
    std::vector<T> tile(static_cast<std::size_t>(m) * L, T(0));
    if (accumulate)
      for (int i = 0; i < m; ++i) std::memcpy(tile.data() + i * L, c + static_cast<long>(i) * ldc + j0, sizeof(T) * rem);
    nn_rows<T, 1>(m, k, a, lda, panel.data(), tile.data(), L, accumulate);
    for (int i = 0; i < m; ++i) std::memcpy(c + static_cast<long>(i) * ldc + j0, tile.data() + i * L, sizeof(T) * rem);
  }
}

template <typename T>
void gemm_nt(int m, int n, int k, const T* a, int lda, const T* b, int ldb, T* c, int ldc, bool accumulate) {
  if (m <= 0 || n <= 0) return;
  if (k <= 0) {
    if (!accumulate)
      for (int i = 0; i < m; ++i) std::fill_n(c + static_cast<long>(i) * ldc, n, T(0));
    return;
  }
  // K is split into chunks so the B rows of one chunk stay cache resident
  // while every row block of A sweeps over them.
  constexpr int kChunk = 1024;
  const int row_blocks = (m + 3) / 4;
  for (int k0 = 0; k0 < k; k0 += kChunk) {
    const int kc = std::min(kChunk, k - k0);
    const bool acc = accumulate || k0 > 0;
#pragma omp parallel for schedule(static)
    for (int rb = 0; rb < row_blocks; ++rb) {
      const int i = rb * 4;
      const int mr = std::min(4, m - i);
      for (int j = 0; j < n; j += 4) {
        const int nr = std::min(4, n - j);
        nt_tile<T>(mr, nr, kc, a + static_cast<long>(i) * lda + k0, lda, b + static_cast<long>(j) * ldb + k0, ldb,
                   c + static_cast<long>(i) * ldc + j, ldc, acc);
      }
    }
  }
}

void set_num_threads(int n) {
#ifdef _OPENMP
  omp_set_num_threads(std::max(1, n));
#else
  (void)n;
#endif
}

int num_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

template void gemm_nn<float>(int, int, int, const float*, int, const float*, int, float*, int, bool);
template void gemm_nn<double>(int, int, int, const double*, int, const double*, int, double*, int, bool);
template void gemm_nt<float>(int, int, int, const float*, int, const float*, int, float*, int, bool);
template void gemm_nt<double>(int, int, int, const double*, int, const double*, int, double*, int, bool);

}  // namespace tide::kernels
