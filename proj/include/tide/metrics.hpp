#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "tide/core.hpp"

namespace tide::metrics {

/// 10 log10(1 / MSE). Identical inputs give +infinity. Throws BadShape.
double psnr(const Image& pred, const Image& ref);
/// Mean SSIM over channels with an 11x11 Gaussian window (sigma 1.5), the
/// same computation as the training loss. Throws TooSmall below 11x11.
double ssim(const Image& pred, const Image& ref);

/// sRGB (D65) to CIE L*a*b*.
std::array<double, 3> srgb_to_lab(double r, double g, double b);

/// Colourfulness: -0.0268 sqrt(mu_a^2 + mu_b^2) + 0.1586 (sigma_a + sigma_b)
/// with population statistics of the a*, b* planes.
double uicm(const Image& img);
/// Mean over pixels of the 5x5 local standard deviation of the luma
/// Y = 0.299 R + 0.587 G + 0.114 B, replicate padding at the borders.
double uiconm(const Image& img);
/// Sharpness: per channel, the Sobel magnitude times the channel is scored
/// with EME over non-overlapping 8x8 blocks,
///   EME = 2 / (k1 k2) sum log((max + 1) / (min + 1)),
/// and the channels are combined with weights 0.299, 0.587, 0.114.
double uism(const Image& img);

inline constexpr double kUiqmC1 = 0.0282;
inline constexpr double kUiqmC2 = 0.2953;
inline constexpr double kUiqmC3 = 3.5753;
inline double uiqm_from(double uicm_v, double uism_v, double uiconm_v) {
  return kUiqmC1 * uicm_v + kUiqmC2 * uism_v + kUiqmC3 * uiconm_v;
}
double uiqm(const Image& img);

/// Names accepted by evaluate(): psnr, ssim, uicm, uiconm, uism, uiqm.
/// lpips and brisque (and anything else) raise UnsupportedMetric.
void check_metric_names(const std::vector<std::string>& metrics);

struct MetricReport {
  std::vector<std::string> metrics;
  std::vector<std::string> images;
  std::vector<std::vector<double>> values;  // [image][metric]

  std::vector<double> means() const;
  /// Header `image,<metrics>`, one row per image, then `MEAN`. Six decimals,
  /// infinities as `inf`.
  std::string csv() const;
};

MetricReport evaluate(const std::vector<Image>& preds, const std::vector<Image>& refs,
                      const std::vector<std::string>& names, const std::vector<std::string>& metrics);

/// Pairs files by name. Throws MissingPair, UnreadableImage, UnsupportedMetric.
MetricReport evaluate_pairs(const std::filesystem::path& pred_dir, const std::filesystem::path& ref_dir,
                            const std::vector<std::string>& metrics);

}  // namespace tide::metrics
