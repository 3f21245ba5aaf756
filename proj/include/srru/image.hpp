#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "srru/tensor.hpp"

namespace srru {

enum class ValueRange { Unit, Byte };  // [0,1] or [0,255]

inline double range_max(ValueRange r) { return r == ValueRange::Unit ? 1.0 : 255.0; }

/// Single-channel image in row-major order.
struct ImagePlane {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> data;
  ValueRange range = ValueRange::Byte;

  ImagePlane() = default;
  ImagePlane(std::size_t h, std::size_t w, double fill = 0.0, ValueRange r = ValueRange::Byte)
      : height(h), width(w), data(h * w, fill), range(r) {}

  double& at(std::size_t y, std::size_t x) { return data[y * width + x]; }
  [[nodiscard]] double at(std::size_t y, std::size_t x) const { return data[y * width + x]; }
  [[nodiscard]] std::size_t size() const { return data.size(); }

  friend bool operator==(const ImagePlane&, const ImagePlane&) = default;
};

/// 8-bit interleaved RGB.
struct RgbImage {
  static constexpr std::size_t kChannels = 3;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> data;

  RgbImage() = default;
  RgbImage(std::size_t h, std::size_t w) : height(h), width(w), data(h * w * kChannels, 0) {}

  std::uint8_t& at(std::size_t y, std::size_t x, std::size_t c) {
    return data[(y * width + x) * kChannels + c];
  }
  [[nodiscard]] std::uint8_t at(std::size_t y, std::size_t x, std::size_t c) const {
    return data[(y * width + x) * kChannels + c];
  }
};

inline double quantize_byte(double v) { return std::clamp(std::round(v), 0.0, 255.0); }

/// Rounds and clamps to integer levels of the declared range, returned in
/// the byte domain.
inline ImagePlane to_byte_levels(const ImagePlane& img) {
  ImagePlane out(img.height, img.width, 0.0, ValueRange::Byte);
  const double s = 255.0 / range_max(img.range);
  for (std::size_t i = 0; i < img.size(); ++i) out.data[i] = quantize_byte(img.data[i] * s);
  return out;
}

inline ImagePlane rescale_range(const ImagePlane& img, ValueRange to) {
  ImagePlane out = img;
  out.range = to;
  const double s = range_max(to) / range_max(img.range);
  for (auto& v : out.data) v *= s;
  return out;
}

inline ImagePlane crop(const ImagePlane& img, std::size_t top, std::size_t left, std::size_t h,
                       std::size_t w) {
  if (top + h > img.height || left + w > img.width) {
    throw ShapeError("crop: window " + std::to_string(h) + "x" + std::to_string(w) + " at (" +
                     std::to_string(top) + "," + std::to_string(left) + ") exceeds " +
                     std::to_string(img.height) + "x" + std::to_string(img.width));
  }
  ImagePlane out(h, w, 0.0, img.range);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) out.at(y, x) = img.at(top + y, left + x);
  return out;
}

/// Crops the bottom/right so both dims are multiples of `multiple`.
inline ImagePlane modcrop(const ImagePlane& img, std::size_t multiple) {
  return crop(img, 0, 0, img.height - img.height % multiple, img.width - img.width % multiple);
}

/// Removes `shave` pixels from every border.
inline ImagePlane shave_border(const ImagePlane& img, std::size_t shave) {
  if (2 * shave >= img.height || 2 * shave >= img.width) {
    throw ShapeError("shave_border: shave " + std::to_string(shave) + " too large for " +
                     std::to_string(img.height) + "x" + std::to_string(img.width));
  }
  return crop(img, shave, shave, img.height - 2 * shave, img.width - 2 * shave);
}

/// Rotates counter-clockwise by quarter_turns * 90 degrees.
inline ImagePlane rotate90(const ImagePlane& img, int quarter_turns) {
  int q = ((quarter_turns % 4) + 4) % 4;
  ImagePlane cur = img;
  while (q-- > 0) {
    ImagePlane next(cur.width, cur.height, 0.0, cur.range);
    for (std::size_t y = 0; y < cur.height; ++y)
      for (std::size_t x = 0; x < cur.width; ++x) next.at(cur.width - 1 - x, y) = cur.at(y, x);
    cur = std::move(next);
  }
  return cur;
}

inline ImagePlane flip_horizontal(const ImagePlane& img) {
  ImagePlane out(img.height, img.width, 0.0, img.range);
  for (std::size_t y = 0; y < img.height; ++y)
    for (std::size_t x = 0; x < img.width; ++x) out.at(y, img.width - 1 - x) = img.at(y, x);
  return out;
}

/// Plane -> 1x1xHxW tensor, values rescaled to [0,1].
template <typename T>
Tensor<T> to_tensor(const ImagePlane& img) {
  Tensor<T> t(1, 1, img.height, img.width);
  const double s = 1.0 / range_max(img.range);
  for (std::size_t i = 0; i < img.size(); ++i) t[i] = static_cast<T>(img.data[i] * s);
  return t;
}

/// One (sample, channel) plane of a tensor as a [0,1] image.
template <typename T>
ImagePlane from_tensor(const Tensor<T>& t, std::size_t n = 0, std::size_t c = 0) {
  ImagePlane img(t.height(), t.width(), 0.0, ValueRange::Unit);
  auto p = t.plane(n, c);
  for (std::size_t i = 0; i < p.size(); ++i) img.data[i] = static_cast<double>(p[i]);
  return img;
}

/// Stacks equally sized planes into a (N,1,H,W) tensor in [0,1].
template <typename T>
Tensor<T> stack_planes(const std::vector<const ImagePlane*>& planes) {
  if (planes.empty()) throw ShapeError("stack_planes: no planes");
  const std::size_t h = planes.front()->height, w = planes.front()->width;
  Tensor<T> t(planes.size(), 1, h, w);
  for (std::size_t n = 0; n < planes.size(); ++n) {
    require_dim("stack_planes", "height", h, planes[n]->height);
    require_dim("stack_planes", "width", w, planes[n]->width);
    const double s = 1.0 / range_max(planes[n]->range);
    auto dst = t.plane(n, 0);
    for (std::size_t i = 0; i < dst.size(); ++i)
      dst[i] = static_cast<T>(planes[n]->data[i] * s);
  }
  return t;
}

}  // namespace srru
