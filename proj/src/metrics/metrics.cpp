#include "tide/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>
#include <sstream>

#include "tide/error.hpp"
#include "tide/io.hpp"
#include "tide/losses.hpp"

namespace tide::metrics {

namespace {

void same_shape(const Image& a, const Image& b) {
  if (a.h() != b.h() || a.w() != b.w())
    throw Error(ErrorCode::BadShape, "image sizes differ: " + std::to_string(a.h()) + "x" + std::to_string(a.w()) +
                                         " vs " + std::to_string(b.h()) + "x" + std::to_string(b.w()));
}

ag::Var<double> as_double(const Image& img) {
  const Tensor<float>& t = img.tensor();
  Tensor<double> d(t.shape());
  for (std::size_t i = 0; i < t.size(); ++i) d[i] = t[i];
  return ag::Var<double>(d);
}

double srgb_linear(double c) { return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4); }

double lab_f(double t) {
  constexpr double d = 6.0 / 29.0;
  return t > d * d * d ? std::cbrt(t) : t / (3 * d * d) + 4.0 / 29.0;
}

constexpr double kM[3][3] = {{0.4124564, 0.3575761, 0.1804375},
                             {0.2126729, 0.7151522, 0.0721750},
                             {0.0193339, 0.1191920, 0.9503041}};

double luma(const Image& img, int y, int x) {
  return 0.299 * img.at(0, y, x) + 0.587 * img.at(1, y, x) + 0.114 * img.at(2, y, x);
}

double eme(const std::vector<double>& plane, int h, int w) {
  constexpr int kBlock = 8;
  const int k1 = h / kBlock, k2 = w / kBlock;
  if (k1 == 0 || k2 == 0) return 0.0;
  double sum = 0;
  for (int by = 0; by < k1; ++by)
    for (int bx = 0; bx < k2; ++bx) {
      double lo = std::numeric_limits<double>::infinity(), hi = -lo;
      for (int y = by * kBlock; y < (by + 1) * kBlock; ++y)
        for (int x = bx * kBlock; x < (bx + 1) * kBlock; ++x) {
          lo = std::min(lo, plane[static_cast<std::size_t>(y) * w + x]);
          hi = std::max(hi, plane[static_cast<std::size_t>(y) * w + x]);
        }
      sum += std::log((hi + 1.0) / (lo + 1.0));
    }
  return 2.0 / (k1 * k2) * sum;
}

std::string fmt(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

double compute(const std::string& m, const Image& pred, const Image& ref) {
  if (m == "psnr") return psnr(pred, ref);
  if (m == "ssim") return ssim(pred, ref);
  if (m == "uicm") return uicm(pred);
  if (m == "uiconm") return uiconm(pred);
  if (m == "uism") return uism(pred);
  return uiqm(pred);
}

}  // namespace

double psnr(const Image& pred, const Image& ref) {
  same_shape(pred, ref);
  const auto& a = pred.tensor();
  const auto& b = ref.tensor();
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    s += d * d;
  }
  const double mse = s / static_cast<double>(a.size());
  if (mse == 0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

double ssim(const Image& pred, const Image& ref) {
  same_shape(pred, ref);
  ag::NoGradGuard guard;
  return tide::ssim<double>(as_double(pred), as_double(ref)).value()[0];
}

std::array<double, 3> srgb_to_lab(double r, double g, double b) {
  const double lin[3] = {srgb_linear(r), srgb_linear(g), srgb_linear(b)};
  double xyz[3], white[3];
  for (int i = 0; i < 3; ++i) {
    xyz[i] = kM[i][0] * lin[0] + kM[i][1] * lin[1] + kM[i][2] * lin[2];
    white[i] = kM[i][0] + kM[i][1] + kM[i][2];
  }
  const double fx = lab_f(xyz[0] / white[0]), fy = lab_f(xyz[1] / white[1]), fz = lab_f(xyz[2] / white[2]);
  return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

double uicm(const Image& img) {
  const std::size_t n = static_cast<std::size_t>(img.h()) * img.w();
  std::vector<double> a(n), b(n);
  double sa = 0, sb = 0;
  for (int y = 0; y < img.h(); ++y)
    for (int x = 0; x < img.w(); ++x) {
      const auto lab = srgb_to_lab(img.at(0, y, x), img.at(1, y, x), img.at(2, y, x));
      const std::size_t i = static_cast<std::size_t>(y) * img.w() + x;
      a[i] = lab[1];
      b[i] = lab[2];
      sa += lab[1];
      sb += lab[2];
    }
  const double ma = sa / n, mb = sb / n;
  // Two passes so a constant plane has exactly zero spread.
  double va = 0, vb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    va += (a[i] - ma) * (a[i] - ma);
    vb += (b[i] - mb) * (b[i] - mb);
  }
  return -0.0268 * std::sqrt(ma * ma + mb * mb) + 0.1586 * (std::sqrt(va / n) + std::sqrt(vb / n));
}

double uiconm(const Image& img) {
  const int h = img.h(), w = img.w();
  std::vector<double> lum(static_cast<std::size_t>(h) * w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) lum[static_cast<std::size_t>(y) * w + x] = luma(img, y, x);
  double total = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0;
      double window[25];
      int k = 0;
      for (int dy = -2; dy <= 2; ++dy)
        for (int dx = -2; dx <= 2; ++dx) {
          const int sy = std::clamp(y + dy, 0, h - 1), sx = std::clamp(x + dx, 0, w - 1);
          window[k] = lum[static_cast<std::size_t>(sy) * w + sx];
          s += window[k++];
        }
      const double mean = s / 25.0;
      double v = 0;
      for (double e : window) v += (e - mean) * (e - mean);
      total += std::sqrt(v / 25.0);
    }
  return total / (static_cast<double>(h) * w);
}

double uism(const Image& img) {
  const int h = img.h(), w = img.w();
  constexpr double kWeights[3] = {0.299, 0.587, 0.114};
  double out = 0;
  std::vector<double> edge(static_cast<std::size_t>(h) * w);
  for (int c = 0; c < 3; ++c) {
    auto px = [&](int y, int x) { return static_cast<double>(img.at(c, std::clamp(y, 0, h - 1), std::clamp(x, 0, w - 1))); };
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double gx = (px(y - 1, x + 1) + 2 * px(y, x + 1) + px(y + 1, x + 1)) -
                          (px(y - 1, x - 1) + 2 * px(y, x - 1) + px(y + 1, x - 1));
        const double gy = (px(y + 1, x - 1) + 2 * px(y + 1, x) + px(y + 1, x + 1)) -
                          (px(y - 1, x - 1) + 2 * px(y - 1, x) + px(y - 1, x + 1));
        edge[static_cast<std::size_t>(y) * w + x] = std::sqrt(gx * gx + gy * gy) * px(y, x);
      }
    out += kWeights[c] * eme(edge, h, w);
  }
  return out;
}

double uiqm(const Image& img) { return uiqm_from(uicm(img), uism(img), uiconm(img)); }

void check_metric_names(const std::vector<std::string>& metrics) {
  static const std::set<std::string> known{"psnr", "ssim", "uicm", "uiconm", "uism", "uiqm"};
  if (metrics.empty()) throw Error(ErrorCode::UnsupportedMetric, "no metrics requested");
  for (const auto& m : metrics) {
    if (m == "lpips" || m == "brisque")
      throw Error(ErrorCode::UnsupportedMetric, m + " needs external pretrained models and is not available");
    if (!known.count(m)) throw Error(ErrorCode::UnsupportedMetric, "unknown metric " + m);
  }
}

std::vector<double> MetricReport::means() const {
  std::vector<double> m(metrics.size(), 0.0);
  if (values.empty()) return m;
  for (const auto& row : values)
    for (std::size_t j = 0; j < m.size(); ++j) m[j] += row[j];
  for (auto& v : m) v /= static_cast<double>(values.size());
  return m;
}

std::string MetricReport::csv() const {
  std::ostringstream out;
  out << "image";
  for (const auto& m : metrics) out << ',' << m;
  out << '\n';
  for (std::size_t i = 0; i < values.size(); ++i) {
    out << images[i];
    for (double v : values[i]) out << ',' << fmt(v);
    out << '\n';
  }
  out << "MEAN";
  for (double v : means()) out << ',' << fmt(v);
  out << '\n';
  return out.str();
}

MetricReport evaluate(const std::vector<Image>& preds, const std::vector<Image>& refs,
                      const std::vector<std::string>& names, const std::vector<std::string>& metrics) {
  check_metric_names(metrics);
  if (preds.size() != refs.size() || preds.size() != names.size())
    throw Error(ErrorCode::CountMismatch, "predictions, references and names differ in count");
  MetricReport r;
  r.metrics = metrics;
  r.images = names;
  r.values.assign(preds.size(), std::vector<double>(metrics.size()));
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < preds.size(); ++i)
    for (std::size_t j = 0; j < metrics.size(); ++j) r.values[i][j] = compute(metrics[j], preds[i], refs[i]);
  return r;
}

MetricReport evaluate_pairs(const std::filesystem::path& pred_dir, const std::filesystem::path& ref_dir,
                            const std::vector<std::string>& metrics) {
  check_metric_names(metrics);
  const auto preds = io::list_images(pred_dir);
  const auto refs = io::list_images(ref_dir);
  std::set<std::string> ref_names;
  for (const auto& p : refs) ref_names.insert(p.filename().string());
  std::set<std::string> pred_names;
  for (const auto& p : preds) {
    pred_names.insert(p.filename().string());
    if (!ref_names.count(p.filename().string()))
      throw Error(ErrorCode::MissingPair, "no reference for " + p.filename().string() + " in " + ref_dir.string());
  }
  for (const auto& n : ref_names)
    if (!pred_names.count(n)) throw Error(ErrorCode::MissingPair, "no prediction for " + n + " in " + pred_dir.string());

  std::vector<Image> a, b;
  std::vector<std::string> names;
  for (const auto& p : preds) {
    a.push_back(io::read_png(p));
    b.push_back(io::read_png(ref_dir / p.filename()));
    names.push_back(p.filename().string());
  }
  return evaluate(a, b, names, metrics);
}

}  // namespace tide::metrics
