#pragma once

// PNG read/write through libpng's simplified API; uncompressed BMP read.

#include <png.h>

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "srru/image.hpp"
#include "srru/resample.hpp"

namespace srru {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Decoded 8-bit image with 1 (gray) or 3 (RGB) interleaved channels.
struct DecodedImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  std::vector<std::uint8_t> pixels;

  [[nodiscard]] bool grayscale() const { return channels == 1; }

  [[nodiscard]] RgbImage to_rgb() const {
    RgbImage out(height, width);
    for (std::size_t i = 0; i < height * width; ++i)
      for (std::size_t c = 0; c < 3; ++c)
        out.data[i * 3 + c] = pixels[i * channels + (channels == 1 ? 0 : c)];
    return out;
  }

  /// Gray images map directly; RGB images yield their rounded luma.
  [[nodiscard]] ImagePlane luma() const {
    if (channels == 1) {
      ImagePlane p(height, width);
      for (std::size_t i = 0; i < p.size(); ++i) p.data[i] = pixels[i];
      return p;
    }
    return rgb_to_y_levels(to_rgb());
  }
};

namespace detail {

inline DecodedImage read_png(const std::filesystem::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (png_image_begin_read_from_file(&image, path.string().c_str()) == 0) {
    throw IoError("cannot read PNG '" + path.string() + "': " + image.message);
  }
  const bool gray = (image.format & PNG_FORMAT_FLAG_COLOR) == 0;
  image.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  DecodedImage out;
  out.height = image.height;
  out.width = image.width;
  out.channels = gray ? 1 : 3;
  out.pixels.resize(PNG_IMAGE_SIZE(image));
  if (png_image_finish_read(&image, nullptr, out.pixels.data(), 0, nullptr) == 0) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw IoError("cannot decode PNG '" + path.string() + "': " + msg);
  }
  return out;
}

inline std::uint32_t le32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

/// 24/32-bit uncompressed BMP.
inline DecodedImage read_bmp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open BMP '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), {});
  if (bytes.size() < 54 || bytes[0] != 'B' || bytes[1] != 'M') {
    throw IoError("not a BMP file: '" + path.string() + "'");
  }
  const std::uint32_t offset = le32(&bytes[10]);
  const auto width = static_cast<std::int32_t>(le32(&bytes[18]));
  const auto height_raw = static_cast<std::int32_t>(le32(&bytes[22]));
  const std::uint16_t bpp = static_cast<std::uint16_t>(bytes[28] | (bytes[29] << 8));
  const std::uint32_t compression = le32(&bytes[30]);
  if ((bpp != 24 && bpp != 32) || compression != 0 || width <= 0 || height_raw == 0) {
    throw IoError("unsupported BMP variant in '" + path.string() + "'");
  }
  const bool bottom_up = height_raw > 0;
  const std::size_t h = static_cast<std::size_t>(bottom_up ? height_raw : -height_raw);
  const std::size_t w = static_cast<std::size_t>(width);
  const std::size_t bytes_pp = bpp / 8;
  const std::size_t stride = (w * bytes_pp + 3) & ~std::size_t{3};
  if (offset + stride * h > bytes.size()) throw IoError("truncated BMP '" + path.string() + "'");
  DecodedImage out;
  out.height = h;
  out.width = w;
  out.channels = 3;
  out.pixels.resize(h * w * 3);
  for (std::size_t y = 0; y < h; ++y) {
    const std::size_t src_row = bottom_up ? h - 1 - y : y;
    const std::uint8_t* row = &bytes[offset + src_row * stride];
    for (std::size_t x = 0; x < w; ++x) {
      const std::uint8_t* px = row + x * bytes_pp;
      out.pixels[(y * w + x) * 3 + 0] = px[2];
      out.pixels[(y * w + x) * 3 + 1] = px[1];
      out.pixels[(y * w + x) * 3 + 2] = px[0];
    }
  }
  return out;
}

inline std::string lower_extension(const std::filesystem::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

}  // namespace detail

inline bool is_supported_image(const std::filesystem::path& p) {
  const std::string ext = detail::lower_extension(p);
  return ext == ".png" || ext == ".bmp";
}

inline DecodedImage read_image(const std::filesystem::path& path) {
  const std::string ext = detail::lower_extension(path);
  if (ext == ".png") return detail::read_png(path);
  if (ext == ".bmp") return detail::read_bmp(path);
  throw IoError("unsupported image format '" + path.string() + "' (PNG or BMP expected)");
}

inline void write_png(const std::filesystem::path& path, std::size_t height, std::size_t width,
                      std::size_t channels, const std::uint8_t* pixels) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  if (png_image_write_to_file(&image, path.string().c_str(), 0, pixels, 0, nullptr) == 0) {
    throw IoError("cannot write PNG '" + path.string() + "': " + image.message);
  }
}

/// Writes a plane as 8-bit gray after rounding to byte levels.
inline void write_png(const std::filesystem::path& path, const ImagePlane& img) {
  const ImagePlane q = to_byte_levels(img);
  std::vector<std::uint8_t> px(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) px[i] = static_cast<std::uint8_t>(q.data[i]);
  write_png(path, q.height, q.width, 1, px.data());
}

inline void write_png(const std::filesystem::path& path, const RgbImage& img) {
  write_png(path, img.height, img.width, 3, img.data.data());
}

}  // namespace srru
