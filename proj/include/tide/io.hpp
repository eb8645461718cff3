#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "tide/core.hpp"

namespace tide::io {

namespace fs = std::filesystem;

/// 8-bit PNG to [0,1] by v/255. Gray and alpha inputs are expanded to RGB.
/// Throws UnreadableImage.
Image read_png(const fs::path& path);
/// Rounds v*255 half-up after clamping to [0,1]. Throws IOFailure.
void write_png(const fs::path& path, const Image& img);

/// Single-channel 8-bit PNG of a map (one plane of a 1xCxHxW tensor).
void write_gray_png(const fs::path& path, const Tensor<float>& t, int channel = 0);
/// Stores the first four channels of a 1xCxHxW tensor in [0,1] as a 16-bit
/// RGBA PNG, and reads it back.
void write_maps_png16(const fs::path& path, const Tensor<float>& maps);
Tensor<float> read_maps_png16(const fs::path& path);

/// Sorted *.png files of a directory. Throws IOFailure when `dir` is missing.
std::vector<fs::path> list_images(const fs::path& dir);

/// Largest centered crop whose sides are multiples of 2^n_down. Emits a
/// CroppedInput warning when the image changes.
Image center_crop_valid(const Image& img, int n_down, const std::string& label = "");
/// Bilinear resize (half-pixel centers).
Image resize_bilinear(const Image& img, int h, int w);

}  // namespace tide::io
