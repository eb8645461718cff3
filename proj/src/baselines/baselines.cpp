#include "tide/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "tide/error.hpp"

namespace tide::baselines {

namespace {

constexpr int kBins = 256;

int bin_of(double v) { return std::clamp(static_cast<int>(v * (kBins - 1) + 0.5), 0, kBins - 1); }

// Luma/chroma split so histogram methods only touch brightness.
struct YCbCr {
  std::vector<double> y, cb, cr;
};

YCbCr to_ycbcr(const Image& img) {
  YCbCr o;
  const std::size_t n = static_cast<std::size_t>(img.h()) * img.w();
  o.y.resize(n);
  o.cb.resize(n);
  o.cr.resize(n);
  for (int y = 0; y < img.h(); ++y)
    for (int x = 0; x < img.w(); ++x) {
      const double r = img.at(0, y, x), g = img.at(1, y, x), b = img.at(2, y, x);
      const std::size_t i = static_cast<std::size_t>(y) * img.w() + x;
      o.y[i] = 0.299 * r + 0.587 * g + 0.114 * b;
      o.cb[i] = (b - o.y[i]) * 0.564;
      o.cr[i] = (r - o.y[i]) * 0.713;
    }
  return o;
}

Image from_ycbcr(const YCbCr& c, int h, int w) {
  Image out(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      const double r = c.y[i] + c.cr[i] / 0.713;
      const double b = c.y[i] + c.cb[i] / 0.564;
      const double g = (c.y[i] - 0.299 * r - 0.114 * b) / 0.587;
      out.at(0, y, x) = static_cast<float>(std::clamp(r, 0.0, 1.0));
      out.at(1, y, x) = static_cast<float>(std::clamp(g, 0.0, 1.0));
      out.at(2, y, x) = static_cast<float>(std::clamp(b, 0.0, 1.0));
    }
  return out;
}

// Equalizing map from a histogram: cdf rescaled so the first occupied bin
// maps to 0.
std::array<double, kBins> cdf_map(const std::array<double, kBins>& hist) {
  std::array<double, kBins> m{};
  double total = 0, first = 0;
  for (int i = 0; i < kBins; ++i) total += hist[i];
  for (int i = 0; i < kBins; ++i)
    if (hist[i] > 0) {
      first = hist[i];
      break;
    }
  double acc = 0;
  for (int i = 0; i < kBins; ++i) {
    acc += hist[i];
    m[i] = total - first > 0 ? std::clamp((acc - first) / (total - first), 0.0, 1.0) : i / double(kBins - 1);
  }
  return m;
}

double plane(const Image& img, Prior prior, int k, int y, int x) {
  switch (prior) {
    case Prior::Rgb: return img.at(k, y, x);
    case Prior::GreenBlue: return img.at(k + 1, y, x);
    case Prior::RedInverted: return k == 0 ? 1.0 - img.at(0, y, x) : img.at(k, y, x);
  }
  return 0;
}

int plane_count(Prior prior) { return prior == Prior::GreenBlue ? 2 : 3; }

Tensor<float> min_filter(const std::vector<double>& src, int h, int w, int patch) {
  const int r = patch / 2;
  // Separable: a rectangle minimum equals the column minimum of row minima.
  std::vector<double> rows(src.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double m = src[static_cast<std::size_t>(y) * w + x];
      for (int dx = std::max(0, x - r); dx <= std::min(w - 1, x + r); ++dx)
        m = std::min(m, src[static_cast<std::size_t>(y) * w + dx]);
      rows[static_cast<std::size_t>(y) * w + x] = m;
    }
  Tensor<float> out(Shape{1, 1, h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double m = rows[static_cast<std::size_t>(y) * w + x];
      for (int dy = std::max(0, y - r); dy <= std::min(h - 1, y + r); ++dy)
        m = std::min(m, rows[static_cast<std::size_t>(dy) * w + x]);
      out.at(0, 0, y, x) = static_cast<float>(m);
    }
  return out;
}

}  // namespace

Method method_from_string(std::string_view name) {
  if (name == "wb") return Method::WhiteBalance;
  if (name == "gamma") return Method::Gamma;
  if (name == "he") return Method::HistEq;
  if (name == "clahe") return Method::Clahe;
  if (name == "dcp") return Method::Dcp;
  if (name == "udcp") return Method::Udcp;
  if (name == "rcp") return Method::Rcp;
  throw Error(ErrorCode::UnknownMethod,
              "unknown baseline '" + std::string(name) + "' (expected wb, gamma, he, clahe, dcp, udcp or rcp)");
}

std::string_view to_string(Method m) {
  switch (m) {
    case Method::WhiteBalance: return "wb";
    case Method::Gamma: return "gamma";
    case Method::HistEq: return "he";
    case Method::Clahe: return "clahe";
    case Method::Dcp: return "dcp";
    case Method::Udcp: return "udcp";
    case Method::Rcp: return "rcp";
  }
  return "unknown";
}

Tensor<float> dark_channel(const Image& img, int patch, Prior prior) {
  if (patch < 1 || patch % 2 == 0) throw Error(ErrorCode::BadParams, "patch size must be odd and positive");
  const int h = img.h(), w = img.w();
  std::vector<double> m(static_cast<std::size_t>(h) * w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double v = plane(img, prior, 0, y, x);
      for (int k = 1; k < plane_count(prior); ++k) v = std::min(v, plane(img, prior, k, y, x));
      m[static_cast<std::size_t>(y) * w + x] = v;
    }
  return min_filter(m, h, w, patch);
}

DehazeResult dehaze(const Image& img, Prior prior, const Params& p) {
  const int h = img.h(), w = img.w();
  DehazeResult r;
  r.dark = dark_channel(img, p.patch, prior);

  // Airlight: mean colour of the brightest dark-channel pixels.
  const std::size_t n = static_cast<std::size_t>(h) * w;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const std::size_t keep = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(p.airlight_fraction * n)));
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return r.dark[a] > r.dark[b]; });
  for (std::size_t i = 0; i < keep; ++i) {
    const int y = static_cast<int>(order[i] / w), x = static_cast<int>(order[i] % w);
    for (int c = 0; c < 3; ++c) r.airlight[c] += img.at(c, y, x);
  }
  for (auto& a : r.airlight) a = std::max(a / keep, 1e-6);

  // Transmission from the dark channel of the airlight-normalized image.
  Image norm(h, w);
  for (int c = 0; c < 3; ++c) {
    double a = r.airlight[c];
    if (prior == Prior::RedInverted && c == 0) a = std::max(1.0 - r.airlight[0], 1e-6);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double v = prior == Prior::RedInverted && c == 0 ? 1.0 - img.at(0, y, x) : img.at(c, y, x);
        norm.at(c, y, x) = static_cast<float>(v / a);
      }
  }
  // The normalized planes are already in prior form; take their plain minimum.
  std::vector<double> m(n);
  const int first = prior == Prior::GreenBlue ? 1 : 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double v = norm.at(first, y, x);
      for (int c = first + 1; c < 3; ++c) v = std::min(v, static_cast<double>(norm.at(c, y, x)));
      m[static_cast<std::size_t>(y) * w + x] = v;
    }
  const Tensor<float> dn = min_filter(m, h, w, p.patch);
  r.transmission = Tensor<float>(Shape{1, 1, h, w});
  r.output = Image(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double t = std::clamp(1.0 - p.omega * dn.at(0, 0, y, x), p.t0, 1.0);
      r.transmission.at(0, 0, y, x) = static_cast<float>(t);
      for (int c = 0; c < 3; ++c) {
        const double j = (img.at(c, y, x) - r.airlight[c]) / t + r.airlight[c];
        r.output.at(c, y, x) = static_cast<float>(std::clamp(j, 0.0, 1.0));
      }
    }
  return r;
}

Image white_balance(const Image& img) {
  const int h = img.h(), w = img.w();
  const double n = static_cast<double>(h) * w;
  auto means = [&](const Image& im) {
    std::array<double, 3> m{};
    for (int c = 0; c < 3; ++c) {
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) m[c] += im.at(c, y, x);
      m[c] /= n;
    }
    return m;
  };
  const auto m0 = means(img);
  const double target = (m0[0] + m0[1] + m0[2]) / 3.0;
  // Repeated gray-world scaling: clipping at 1 lowers a scaled channel's
  // mean, so the gain is re-estimated on the clipped result.
  Image out = img.clone();
  std::array<double, 3> gain{1.0, 1.0, 1.0};
  for (int iter = 0; iter < 50; ++iter) {
    const auto m = means(out);
    double worst = 0;
    for (int c = 0; c < 3; ++c) worst = std::max(worst, std::abs(m[c] - target));
    if (worst < 1e-7) break;
    for (int c = 0; c < 3; ++c)
      if (m[c] > 0) gain[c] *= target / m[c];
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
          out.at(c, y, x) = static_cast<float>(std::clamp(img.at(c, y, x) * gain[c], 0.0, 1.0));
  }
  return out;
}

Image gamma_correct(const Image& img, double gamma) {
  if (!(gamma > 0)) throw Error(ErrorCode::BadParams, "gamma must be positive");
  Image out = img.clone();
  auto& t = out.tensor();
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<float>(std::pow(static_cast<double>(t[i]), 1.0 / gamma));
  return out;
}

Image equalize(const Image& img) {
  YCbCr c = to_ycbcr(img);
  std::array<double, kBins> hist{};
  for (double v : c.y) hist[bin_of(v)] += 1;
  const auto map = cdf_map(hist);
  for (auto& v : c.y) v = map[bin_of(v)];
  return from_ycbcr(c, img.h(), img.w());
}

Image clahe(const Image& img, double clip, int tiles) {
  if (tiles < 1 || !(clip > 0)) throw Error(ErrorCode::BadParams, "clahe needs tiles >= 1 and clip > 0");
  const int h = img.h(), w = img.w();
  const int ty = std::min(tiles, h), tx = std::min(tiles, w);
  YCbCr c = to_ycbcr(img);
  auto y0 = [&](int i) { return i * h / ty; };
  auto x0 = [&](int j) { return j * w / tx; };
  std::vector<std::array<double, kBins>> maps(static_cast<std::size_t>(ty) * tx);
  for (int i = 0; i < ty; ++i)
    for (int j = 0; j < tx; ++j) {
      std::array<double, kBins> hist{};
      double count = 0;
      for (int y = y0(i); y < y0(i + 1); ++y)
        for (int x = x0(j); x < x0(j + 1); ++x) {
          hist[bin_of(c.y[static_cast<std::size_t>(y) * w + x])] += 1;
          count += 1;
        }
      const double limit = std::max(1.0, clip * count / kBins);
      double excess = 0;
      for (auto& b : hist)
        if (b > limit) {
          excess += b - limit;
          b = limit;
        }
      for (auto& b : hist) b += excess / kBins;
      // Plain cdf (no first-bin offset) keeps flat tiles near identity.
      auto& m = maps[static_cast<std::size_t>(i) * tx + j];
      double acc = 0;
      for (int k = 0; k < kBins; ++k) {
        acc += hist[k];
        m[k] = count > 0 ? acc / count : k / double(kBins - 1);
      }
    }
  // Bilinear blend between the four nearest tile centres.
  for (int y = 0; y < h; ++y) {
    const double fy = (y + 0.5) * ty / h - 0.5;
    const int i0 = std::clamp(static_cast<int>(std::floor(fy)), 0, ty - 1), i1 = std::min(i0 + 1, ty - 1);
    const double ay = std::clamp(fy - i0, 0.0, 1.0);
    for (int x = 0; x < w; ++x) {
      const double fx = (x + 0.5) * tx / w - 0.5;
      const int j0 = std::clamp(static_cast<int>(std::floor(fx)), 0, tx - 1), j1 = std::min(j0 + 1, tx - 1);
      const double ax = std::clamp(fx - j0, 0.0, 1.0);
      const std::size_t idx = static_cast<std::size_t>(y) * w + x;
      const int b = bin_of(c.y[idx]);
      const double top = maps[i0 * tx + j0][b] * (1 - ax) + maps[i0 * tx + j1][b] * ax;
      const double bot = maps[i1 * tx + j0][b] * (1 - ax) + maps[i1 * tx + j1][b] * ax;
      c.y[idx] = top * (1 - ay) + bot * ay;
    }
  }
  return from_ycbcr(c, h, w);
}

Image apply_baseline(const Image& img, Method m, const Params& p) {
  switch (m) {
    case Method::WhiteBalance: return white_balance(img);
    case Method::Gamma: return gamma_correct(img, p.gamma);
    case Method::HistEq: return equalize(img);
    case Method::Clahe: return clahe(img, p.clahe_clip, p.clahe_tiles);
    case Method::Dcp: return dehaze(img, Prior::Rgb, p).output;
    case Method::Udcp: return dehaze(img, Prior::GreenBlue, p).output;
    case Method::Rcp: return dehaze(img, Prior::RedInverted, p).output;
  }
  throw Error(ErrorCode::UnknownMethod, "unknown baseline");
}

}  // namespace tide::baselines
