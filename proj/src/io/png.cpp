#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

#include "tide/error.hpp"
#include "tide/io.hpp"

namespace tide::io {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using File = std::unique_ptr<std::FILE, FileCloser>;

void write_rows(const fs::path& path, int w, int h, int color_type, int depth, std::vector<png_bytep>& rows) {
  File f(std::fopen(path.c_str(), "wb"));
  if (!f) throw Error(ErrorCode::IOFailure, "cannot open " + path.string() + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw Error(ErrorCode::IOFailure, "libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::IOFailure, "failed writing " + path.string());
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, w, h, depth, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  if (depth == 16) png_set_swap(png);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

// Decodes to 8-bit RGB or 16-bit RGBA samples (host order).
struct Decoded {
  int w = 0, h = 0, channels = 0, depth = 8;
  std::vector<unsigned char> data;
};

Decoded decode(const fs::path& path, bool sixteen_rgba) {
  File f(std::fopen(path.c_str(), "rb"));
  if (!f) throw Error(ErrorCode::UnreadableImage, "cannot open " + path.string());
  unsigned char sig[8];
  if (std::fread(sig, 1, 8, f.get()) != 8 || png_sig_cmp(sig, 0, 8))
    throw Error(ErrorCode::UnreadableImage, path.string() + " is not a PNG file");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw Error(ErrorCode::UnreadableImage, "libpng initialisation failed");
  }
  Decoded d;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorCode::UnreadableImage, "corrupt PNG " + path.string());
  }
  png_init_io(png, f.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
  if (sixteen_rgba) {
    if (depth < 16) png_set_expand_16(png);
    png_set_add_alpha(png, 0xFFFF, PNG_FILLER_AFTER);
    png_set_swap(png);
    d.depth = 16;
    d.channels = 4;
  } else {
    if (depth == 16) png_set_strip_16(png);
    png_set_strip_alpha(png);
    d.channels = 3;
  }
  png_read_update_info(png, info);
  d.w = static_cast<int>(png_get_image_width(png, info));
  d.h = static_cast<int>(png_get_image_height(png, info));
  const std::size_t stride = png_get_rowbytes(png, info);
  d.data.resize(stride * d.h);
  std::vector<png_bytep> rows(d.h);
  for (int y = 0; y < d.h; ++y) rows[y] = d.data.data() + stride * y;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return d;
}

unsigned char to_u8(float v) {
  const double c = std::clamp(static_cast<double>(v), 0.0, 1.0);
  return static_cast<unsigned char>(std::floor(c * 255.0 + 0.5));
}

}  // namespace

Image read_png(const fs::path& path) {
  const Decoded d = decode(path, false);
  Image img(d.h, d.w);
  for (int y = 0; y < d.h; ++y)
    for (int x = 0; x < d.w; ++x)
      for (int c = 0; c < 3; ++c)
        img.at(c, y, x) = static_cast<float>(d.data[(static_cast<std::size_t>(y) * d.w + x) * 3 + c] / 255.0);
  return img;
}

void write_png(const fs::path& path, const Image& img) {
  const int h = img.h(), w = img.w();
  std::vector<unsigned char> buf(static_cast<std::size_t>(h) * w * 3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) buf[(static_cast<std::size_t>(y) * w + x) * 3 + c] = to_u8(img.at(c, y, x));
  std::vector<png_bytep> rows(h);
  for (int y = 0; y < h; ++y) rows[y] = buf.data() + static_cast<std::size_t>(y) * w * 3;
  write_rows(path, w, h, PNG_COLOR_TYPE_RGB, 8, rows);
}

void write_gray_png(const fs::path& path, const Tensor<float>& t, int channel) {
  const int h = t.h(), w = t.w();
  std::vector<unsigned char> buf(static_cast<std::size_t>(h) * w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) buf[static_cast<std::size_t>(y) * w + x] = to_u8(t.at(0, channel, y, x));
  std::vector<png_bytep> rows(h);
  for (int y = 0; y < h; ++y) rows[y] = buf.data() + static_cast<std::size_t>(y) * w;
  write_rows(path, w, h, PNG_COLOR_TYPE_GRAY, 8, rows);
}

void write_maps_png16(const fs::path& path, const Tensor<float>& maps) {
  const int h = maps.h(), w = maps.w();
  std::vector<std::uint16_t> buf(static_cast<std::size_t>(h) * w * 4, 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < std::min(4, maps.c()); ++c) {
        const double v = std::clamp(static_cast<double>(maps.at(0, c, y, x)), 0.0, 1.0);
        buf[(static_cast<std::size_t>(y) * w + x) * 4 + c] = static_cast<std::uint16_t>(std::floor(v * 65535.0 + 0.5));
      }
  std::vector<png_bytep> rows(h);
  for (int y = 0; y < h; ++y) rows[y] = reinterpret_cast<png_bytep>(buf.data() + static_cast<std::size_t>(y) * w * 4);
  write_rows(path, w, h, PNG_COLOR_TYPE_RGBA, 16, rows);
}

Tensor<float> read_maps_png16(const fs::path& path) {
  const Decoded d = decode(path, true);
  Tensor<float> t(Shape{1, 4, d.h, d.w});
  const auto* px = reinterpret_cast<const std::uint16_t*>(d.data.data());
  for (int y = 0; y < d.h; ++y)
    for (int x = 0; x < d.w; ++x)
      for (int c = 0; c < 4; ++c)
        t.at(0, c, y, x) = static_cast<float>(px[(static_cast<std::size_t>(y) * d.w + x) * 4 + c] / 65535.0);
  return t;
}

std::vector<fs::path> list_images(const fs::path& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw Error(ErrorCode::IOFailure, "no such directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::string ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".png") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

Image center_crop_valid(const Image& img, int n_down, const std::string& label) {
  const int div = 1 << n_down;
  const int h = img.h() / div * div, w = img.w() / div * div;
  if (h == img.h() && w == img.w()) return img;
  if (h < std::max(8, div) || w < std::max(8, div))
    throw Error(ErrorCode::BadShape, label + " is too small for " + std::to_string(div) + "-divisible cropping");
  warn(Warning::CroppedInput, label + ": " + std::to_string(img.h()) + "x" + std::to_string(img.w()) + " cropped to " +
                                  std::to_string(h) + "x" + std::to_string(w));
  const int y0 = (img.h() - h) / 2, x0 = (img.w() - w) / 2;
  Image out(h, w);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) out.at(c, y, x) = img.at(c, y + y0, x + x0);
  return out;
}

Image resize_bilinear(const Image& img, int h, int w) {
  if (h < 1 || w < 1) throw Error(ErrorCode::BadShape, "resize target must be positive");
  Image out(h, w);
  const double sy = static_cast<double>(img.h()) / h, sx = static_cast<double>(img.w()) / w;
  for (int y = 0; y < h; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, img.h() - 1.0);
    const int y0 = static_cast<int>(fy), y1 = std::min(y0 + 1, img.h() - 1);
    const double ay = fy - y0;
    for (int x = 0; x < w; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, img.w() - 1.0);
      const int x0 = static_cast<int>(fx), x1 = std::min(x0 + 1, img.w() - 1);
      const double ax = fx - x0;
      for (int c = 0; c < 3; ++c) {
        const double top = img.at(c, y0, x0) * (1 - ax) + img.at(c, y0, x1) * ax;
        const double bot = img.at(c, y1, x0) * (1 - ax) + img.at(c, y1, x1) * ax;
        out.at(c, y, x) = static_cast<float>(std::clamp(top * (1 - ay) + bot * ay, 0.0, 1.0));
      }
    }
  }
  return out;
}

}  // namespace tide::io
