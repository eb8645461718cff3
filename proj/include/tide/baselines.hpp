#pragma once

#include <array>
#include <string>
#include <string_view>

#include "tide/core.hpp"

namespace tide::baselines {

enum class Method { WhiteBalance, Gamma, HistEq, Clahe, Dcp, Udcp, Rcp };

/// "wb", "gamma", "he", "clahe", "dcp", "udcp", "rcp". Throws UnknownMethod.
Method method_from_string(std::string_view name);
std::string_view to_string(Method m);

struct Params {
  double gamma = 1.5;
  double clahe_clip = 2.0;  // multiple of the mean bin count
  int clahe_tiles = 8;      // tiles per side
  int patch = 15;           // dark-channel window
  double omega = 0.95;
  double t0 = 0.1;
  double airlight_fraction = 0.001;  // brightest share of dark-channel pixels
};

/// Which colour planes enter the dark channel: DCP uses R,G,B; UDCP G,B;
/// RCP (1-R),G,B.
enum class Prior { Rgb, GreenBlue, RedInverted };

/// min over the prior's channels, then min over a patch x patch window
/// clipped at the image border. Returns 1x1xHxW.
Tensor<float> dark_channel(const Image& img, int patch, Prior prior = Prior::Rgb);

struct DehazeResult {
  Image output;
  Tensor<float> dark;
  Tensor<float> transmission;  // in [t0, 1]
  std::array<double, 3> airlight{};
};
DehazeResult dehaze(const Image& img, Prior prior, const Params& p = {});

Image white_balance(const Image& img);
Image gamma_correct(const Image& img, double gamma);
Image equalize(const Image& img);
Image clahe(const Image& img, double clip, int tiles);

Image apply_baseline(const Image& img, Method m, const Params& p = {});

}  // namespace tide::baselines
