#pragma once

// Brute-force reference implementations. Written directly from the metric
// and loss definitions with plain loops; they share no code with the library.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "tide/core.hpp"

namespace tide::oracle {

inline double pixel(const Image& img, int c, int y, int x) { return img.at(c, y, x); }

inline double psnr(const Image& a, const Image& b) {
  double se = 0;
  int n = 0;
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < a.h(); ++y)
      for (int x = 0; x < a.w(); ++x) {
        const double d = pixel(a, c, y, x) - pixel(b, c, y, x);
        se += d * d;
        ++n;
      }
  if (se == 0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / (se / n));
}

/// Windowed SSIM over the valid region of an 11x11 Gaussian (sigma 1.5),
/// with per-window centered moments.
inline double ssim(const Tensor<double>& a, const Tensor<double>& b) {
  const Shape s = a.shape();
  constexpr int kW = 11;
  double g[kW][kW], gs = 0;
  for (int i = 0; i < kW; ++i)
    for (int j = 0; j < kW; ++j) {
      g[i][j] = std::exp(-((i - 5) * (i - 5) + (j - 5) * (j - 5)) / (2 * 1.5 * 1.5));
      gs += g[i][j];
    }
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  auto at = [&](const Tensor<double>& t, int n, int c, int y, int x) {
    return t[((static_cast<std::size_t>(n) * s.c + c) * s.h + y) * s.w + x];
  };
  double total = 0;
  int count = 0;
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int y = 0; y + kW <= s.h; ++y)
        for (int x = 0; x + kW <= s.w; ++x) {
          double ma = 0, mb = 0;
          for (int i = 0; i < kW; ++i)
            for (int j = 0; j < kW; ++j) {
              ma += g[i][j] / gs * at(a, n, c, y + i, x + j);
              mb += g[i][j] / gs * at(b, n, c, y + i, x + j);
            }
          double va = 0, vb = 0, cov = 0;
          for (int i = 0; i < kW; ++i)
            for (int j = 0; j < kW; ++j) {
              const double da = at(a, n, c, y + i, x + j) - ma, db = at(b, n, c, y + i, x + j) - mb;
              va += g[i][j] / gs * da * da;
              vb += g[i][j] / gs * db * db;
              cov += g[i][j] / gs * da * db;
            }
          total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
          ++count;
        }
  return total / count;
}

inline void lab(double r, double g, double b, double& L, double& A, double& B) {
  auto lin = [](double v) { return v > 0.04045 ? std::pow((v + 0.055) / 1.055, 2.4) : v / 12.92; };
  const double rl = lin(r), gl = lin(g), bl = lin(b);
  const double m[3][3] = {{0.4124564, 0.3575761, 0.1804375},
                          {0.2126729, 0.7151522, 0.0721750},
                          {0.0193339, 0.1191920, 0.9503041}};
  double xyz[3], white[3];
  for (int i = 0; i < 3; ++i) {
    xyz[i] = m[i][0] * rl + m[i][1] * gl + m[i][2] * bl;
    white[i] = m[i][0] + m[i][1] + m[i][2];
  }
  auto f = [](double t) {
    const double e = 216.0 / 24389.0, k = 24389.0 / 27.0;
    return t > e ? std::cbrt(t) : (k * t + 16.0) / 116.0;
  };
  const double fx = f(xyz[0] / white[0]), fy = f(xyz[1] / white[1]), fz = f(xyz[2] / white[2]);
  L = 116 * fy - 16;
  A = 500 * (fx - fy);
  B = 200 * (fy - fz);
}

inline double uicm(const Image& img) {
  std::vector<double> as, bs;
  for (int y = 0; y < img.h(); ++y)
    for (int x = 0; x < img.w(); ++x) {
      double L, A, B;
      lab(pixel(img, 0, y, x), pixel(img, 1, y, x), pixel(img, 2, y, x), L, A, B);
      as.push_back(A);
      bs.push_back(B);
    }
  auto mean = [](const std::vector<double>& v) {
    double s = 0;
    for (double e : v) s += e;
    return s / v.size();
  };
  auto stdev = [&](const std::vector<double>& v) {
    const double m = mean(v);
    double s = 0;
    for (double e : v) s += (e - m) * (e - m);
    return std::sqrt(s / v.size());
  };
  const double ma = mean(as), mb = mean(bs);
  return -0.0268 * std::sqrt(ma * ma + mb * mb) + 0.1586 * (stdev(as) + stdev(bs));
}

inline double uiconm(const Image& img) {
  const int h = img.h(), w = img.w();
  auto lum = [&](int y, int x) {
    y = y < 0 ? 0 : (y >= h ? h - 1 : y);
    x = x < 0 ? 0 : (x >= w ? w - 1 : x);
    return 0.299 * pixel(img, 0, y, x) + 0.587 * pixel(img, 1, y, x) + 0.114 * pixel(img, 2, y, x);
  };
  double total = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double m = 0;
      for (int i = -2; i <= 2; ++i)
        for (int j = -2; j <= 2; ++j) m += lum(y + i, x + j);
      m /= 25;
      double v = 0;
      for (int i = -2; i <= 2; ++i)
        for (int j = -2; j <= 2; ++j) v += (lum(y + i, x + j) - m) * (lum(y + i, x + j) - m);
      total += std::sqrt(v / 25);
    }
  return total / (h * w);
}

inline double uism(const Image& img) {
  const int h = img.h(), w = img.w();
  const int kx[3][3] = {{-1, 0, 1}, {-2, 0, 2}, {-1, 0, 1}};
  const int ky[3][3] = {{-1, -2, -1}, {0, 0, 0}, {1, 2, 1}};
  const double weight[3] = {0.299, 0.587, 0.114};
  double out = 0;
  for (int c = 0; c < 3; ++c) {
    std::vector<std::vector<double>> e(h, std::vector<double>(w));
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double gx = 0, gy = 0;
        for (int i = 0; i < 3; ++i)
          for (int j = 0; j < 3; ++j) {
            const int yy = std::clamp(y + i - 1, 0, h - 1), xx = std::clamp(x + j - 1, 0, w - 1);
            gx += kx[i][j] * pixel(img, c, yy, xx);
            gy += ky[i][j] * pixel(img, c, yy, xx);
          }
        e[y][x] = std::hypot(gx, gy) * pixel(img, c, y, x);
      }
    const int k1 = h / 8, k2 = w / 8;
    double s = 0;
    for (int by = 0; by < k1; ++by)
      for (int bx = 0; bx < k2; ++bx) {
        double lo = 1e300, hi = -1e300;
        for (int y = 0; y < 8; ++y)
          for (int x = 0; x < 8; ++x) {
            lo = std::min(lo, e[by * 8 + y][bx * 8 + x]);
            hi = std::max(hi, e[by * 8 + y][bx * 8 + x]);
          }
        s += std::log((hi + 1) / (lo + 1));
      }
    out += weight[c] * 2.0 / (k1 * k2) * s;
  }
  return out;
}

/// Per-pixel minimum over channels and a clipped patch x patch window.
inline std::vector<double> dark_channel(const Image& img, int patch) {
  const int h = img.h(), w = img.w(), r = patch / 2;
  std::vector<double> out(static_cast<std::size_t>(h) * w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double m = 1e300;
      for (int yy = std::max(0, y - r); yy <= std::min(h - 1, y + r); ++yy)
        for (int xx = std::max(0, x - r); xx <= std::min(w - 1, x + r); ++xx)
          for (int c = 0; c < 3; ++c) m = std::min(m, pixel(img, c, yy, xx));
      out[static_cast<std::size_t>(y) * w + x] = m;
    }
  return out;
}

}  // namespace tide::oracle
