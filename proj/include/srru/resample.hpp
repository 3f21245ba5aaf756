#pragma once

// Bicubic resampling compatible with MATLAB's imresize (Keys kernel,
// a = -0.5, antialiased downscaling, symmetric border extension), and the
// studio-swing YCbCr transform used by super-resolution benchmarks.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <string>
#include <tuple>
#include <vector>

#include "srru/image.hpp"
#include "srru/tensor.hpp"

namespace srru {

enum class EdgeMode { Symmetric, Clamp };

/// Keys cubic convolution kernel with a = -0.5.
inline double cubic_kernel(double x) {
  const double ax = std::abs(x);
  const double ax2 = ax * ax, ax3 = ax2 * ax;
  if (ax <= 1.0) return 1.5 * ax3 - 2.5 * ax2 + 1.0;
  if (ax <= 2.0) return -0.5 * ax3 + 2.5 * ax2 - 4.0 * ax + 2.0;
  return 0.0;
}

inline std::size_t resized_length(std::size_t in, double scale) {
  return static_cast<std::size_t>(std::llround(static_cast<double>(in) * scale));
}

/// Per-output-sample taps along one axis.
struct AxisWeights {
  std::size_t in_length = 0;
  std::size_t out_length = 0;
  std::size_t taps = 0;
  std::vector<std::size_t> indices;  // out_length * taps, already edge-resolved
  std::vector<double> weights;       // out_length * taps, each row sums to 1

  static AxisWeights build(std::size_t in_length, std::size_t out_length, double scale,
                           bool antialias, EdgeMode edge = EdgeMode::Symmetric) {
    if (out_length == 0 || in_length == 0) {
      throw ShapeError("bicubic_resize: zero-length axis (in " + std::to_string(in_length) +
                       ", out " + std::to_string(out_length) + ")");
    }
    const bool stretch = antialias && scale < 1.0;
    const double kernel_width = stretch ? 4.0 / scale : 4.0;
    AxisWeights aw;
    aw.in_length = in_length;
    aw.out_length = out_length;
    aw.taps = static_cast<std::size_t>(std::ceil(kernel_width)) + 2;
    aw.indices.resize(out_length * aw.taps);
    aw.weights.resize(out_length * aw.taps);
    const auto n = static_cast<long long>(in_length);
    for (std::size_t o = 0; o < out_length; ++o) {
      // 1-based coordinates, as in the reference algorithm.
      const double u = static_cast<double>(o + 1) / scale + 0.5 * (1.0 - 1.0 / scale);
      const auto left = static_cast<long long>(std::floor(u - kernel_width / 2.0));
      double sum = 0.0;
      for (std::size_t t = 0; t < aw.taps; ++t) {
        const long long idx = left + static_cast<long long>(t);
        const double d = u - static_cast<double>(idx);
        const double w = stretch ? scale * cubic_kernel(scale * d) : cubic_kernel(d);
        aw.weights[o * aw.taps + t] = w;
        sum += w;
        long long z = idx - 1;  // 0-based
        if (edge == EdgeMode::Symmetric) {
          const long long period = 2 * n;
          z = ((z % period) + period) % period;
          if (z >= n) z = period - 1 - z;
        } else {
          z = std::clamp(z, 0LL, n - 1);
        }
        aw.indices[o * aw.taps + t] = static_cast<std::size_t>(z);
      }
      for (std::size_t t = 0; t < aw.taps; ++t) aw.weights[o * aw.taps + t] /= sum;
    }
    return aw;
  }

  /// dst[o * dst_stride] = sum_t w * src[idx * src_stride]
  template <typename In, typename Out>
  void apply(const In* src, std::size_t src_stride, Out* dst, std::size_t dst_stride) const {
    for (std::size_t o = 0; o < out_length; ++o) {
      double acc = 0.0;
      const std::size_t base = o * taps;
      for (std::size_t t = 0; t < taps; ++t) {
        acc += weights[base + t] * static_cast<double>(src[indices[base + t] * src_stride]);
      }
      dst[o * dst_stride] = static_cast<Out>(acc);
    }
  }

  /// Adjoint of apply: scatter-adds into dst (length in_length).
  template <typename In>
  void apply_adjoint(const In* src, std::size_t src_stride, double* dst) const {
    for (std::size_t o = 0; o < out_length; ++o) {
      const double g = static_cast<double>(src[o * src_stride]);
      const std::size_t base = o * taps;
      for (std::size_t t = 0; t < taps; ++t) dst[indices[base + t]] += weights[base + t] * g;
    }
  }
};

/// Separable 2-D resize. Rows (height) are resampled first, then columns.
class BicubicResizer {
 public:
  BicubicResizer(std::size_t in_h, std::size_t in_w, double scale, bool antialias,
                 EdgeMode edge = EdgeMode::Symmetric)
      : BicubicResizer(in_h, in_w, resized_length(in_h, scale), resized_length(in_w, scale), scale,
                       antialias, edge) {}

  BicubicResizer(std::size_t in_h, std::size_t in_w, std::size_t out_h, std::size_t out_w,
                 double scale, bool antialias, EdgeMode edge = EdgeMode::Symmetric)
      : vertical_(AxisWeights::build(in_h, out_h, scale, antialias, edge)),
        horizontal_(AxisWeights::build(in_w, out_w, scale, antialias, edge)),
        identity_(scale == 1.0 && in_h == out_h && in_w == out_w) {}

  [[nodiscard]] std::size_t out_height() const { return vertical_.out_length; }
  [[nodiscard]] std::size_t out_width() const { return horizontal_.out_length; }
  [[nodiscard]] std::size_t in_height() const { return vertical_.in_length; }
  [[nodiscard]] std::size_t in_width() const { return horizontal_.in_length; }

  /// src is in_h x in_w row-major; dst is out_h x out_w.
  template <typename In, typename Out>
  void resize(const In* src, Out* dst) const {
    const std::size_t ih = in_height(), iw = in_width(), oh = out_height(), ow = out_width();
    if (identity_) {
      for (std::size_t i = 0; i < ih * iw; ++i) dst[i] = static_cast<Out>(src[i]);
      return;
    }
    std::vector<double> mid(oh * iw);
    for (std::size_t x = 0; x < iw; ++x) vertical_.apply(src + x, iw, mid.data() + x, iw);
    for (std::size_t y = 0; y < oh; ++y) horizontal_.apply(mid.data() + y * iw, 1, dst + y * ow, 1);
  }

  /// Adjoint of resize: maps an out_h x out_w gradient to in_h x in_w.
  template <typename In, typename Out>
  void resize_adjoint(const In* grad, Out* dst) const {
    const std::size_t ih = in_height(), iw = in_width(), oh = out_height(), ow = out_width();
    if (identity_) {
      for (std::size_t i = 0; i < ih * iw; ++i) dst[i] = static_cast<Out>(grad[i]);
      return;
    }
    std::vector<double> mid(oh * iw, 0.0);
    for (std::size_t y = 0; y < oh; ++y)
      horizontal_.apply_adjoint(grad + y * ow, 1, mid.data() + y * iw);
    std::vector<double> col(ih);
    for (std::size_t x = 0; x < iw; ++x) {
      std::fill(col.begin(), col.end(), 0.0);
      vertical_.apply_adjoint(mid.data() + x, iw, col.data());
      for (std::size_t y = 0; y < ih; ++y) dst[y * iw + x] = static_cast<Out>(col[y]);
    }
  }

 private:
  AxisWeights vertical_;
  AxisWeights horizontal_;
  bool identity_;
};

/// Bicubic resize by `scale`; output dims are round(in * scale).
inline ImagePlane bicubic_resize(const ImagePlane& img, double scale, bool antialias = true,
                                 EdgeMode edge = EdgeMode::Symmetric) {
  if (!(scale > 0.0)) throw ShapeError("bicubic_resize: scale must be positive");
  const std::size_t oh = resized_length(img.height, scale);
  const std::size_t ow = resized_length(img.width, scale);
  if (oh == 0 || ow == 0) {
    throw ShapeError("bicubic_resize: zero output dimension for " + std::to_string(img.height) +
                     "x" + std::to_string(img.width) + " at scale " + std::to_string(scale));
  }
  const BicubicResizer r(img.height, img.width, oh, ow, scale, antialias, edge);
  ImagePlane out(oh, ow, 0.0, img.range);
  r.resize(img.data.data(), out.data.data());
  return out;
}

/// Resizes every (n, c) plane of a tensor by an integer upscale factor.
template <typename T>
Tensor<T> bicubic_upscale(const Tensor<T>& x, std::size_t factor) {
  const BicubicResizer r(x.height(), x.width(), static_cast<double>(factor), false);
  Tensor<T> out(x.batch(), x.channels(), r.out_height(), r.out_width());
  for (std::size_t n = 0; n < x.batch(); ++n)
    for (std::size_t c = 0; c < x.channels(); ++c)
      r.resize(x.plane(n, c).data(), out.plane(n, c).data());
  return out;
}

/// Adjoint of bicubic_upscale for an input of `input_shape`.
template <typename T>
Tensor<T> bicubic_upscale_backward(const Shape& input_shape, const Tensor<T>& grad_out,
                                   std::size_t factor) {
  const BicubicResizer r(input_shape.height, input_shape.width, static_cast<double>(factor), false);
  require_dim("bicubic_upscale_backward", "grad height", r.out_height(), grad_out.height());
  require_dim("bicubic_upscale_backward", "grad width", r.out_width(), grad_out.width());
  Tensor<T> g(input_shape);
  for (std::size_t n = 0; n < input_shape.batch; ++n)
    for (std::size_t c = 0; c < input_shape.channels; ++c)
      r.resize_adjoint(grad_out.plane(n, c).data(), g.plane(n, c).data());
  return g;
}

// ---------------------------------------------------------------------------
// Color conversion (ITU-R BT.601, studio swing, 8-bit levels)

namespace detail {
inline const Eigen::Matrix3d& ycbcr_matrix() {
  static const Eigen::Matrix3d m = (Eigen::Matrix3d() << 65.481, 128.553, 24.966,  //
                                    -37.797, -74.203, 112.0,                       //
                                    112.0, -93.786, -18.214)
                                       .finished();
  return m;
}
inline const Eigen::Matrix3d& ycbcr_inverse() {
  static const Eigen::Matrix3d inv = ycbcr_matrix().inverse();
  return inv;
}
}  // namespace detail

struct YCbCrPlanes {
  ImagePlane y, cb, cr;
};

/// Unquantized Y/Cb/Cr planes on the byte scale (Y in [16, 235]).
inline YCbCrPlanes rgb_to_ycbcr(const RgbImage& img) {
  YCbCrPlanes out{ImagePlane(img.height, img.width), ImagePlane(img.height, img.width),
                  ImagePlane(img.height, img.width)};
  const auto& m = detail::ycbcr_matrix();
  const Eigen::Vector3d offset(16.0, 128.0, 128.0);
  for (std::size_t y = 0; y < img.height; ++y) {
    for (std::size_t x = 0; x < img.width; ++x) {
      const Eigen::Vector3d rgb(img.at(y, x, 0) / 255.0, img.at(y, x, 1) / 255.0,
                                img.at(y, x, 2) / 255.0);
      const Eigen::Vector3d v = m * rgb + offset;
      out.y.at(y, x) = v[0];
      out.cb.at(y, x) = v[1];
      out.cr.at(y, x) = v[2];
    }
  }
  return out;
}

/// Inverse transform; planes on the byte scale, output rounded and clamped.
inline RgbImage ycbcr_to_rgb(const ImagePlane& y, const ImagePlane& cb, const ImagePlane& cr) {
  if (y.height != cb.height || y.height != cr.height || y.width != cb.width || y.width != cr.width) {
    throw ShapeError("ycbcr_to_rgb: plane dimensions differ");
  }
  const ImagePlane yb = rescale_range(y, ValueRange::Byte);
  const ImagePlane cbb = rescale_range(cb, ValueRange::Byte);
  const ImagePlane crb = rescale_range(cr, ValueRange::Byte);
  RgbImage out(y.height, y.width);
  const auto& inv = detail::ycbcr_inverse();
  for (std::size_t r = 0; r < y.height; ++r) {
    for (std::size_t c = 0; c < y.width; ++c) {
      const Eigen::Vector3d v(yb.at(r, c) - 16.0, cbb.at(r, c) - 128.0, crb.at(r, c) - 128.0);
      const Eigen::Vector3d rgb = inv * v * 255.0;
      for (int k = 0; k < 3; ++k) {
        out.at(r, c, static_cast<std::size_t>(k)) = static_cast<std::uint8_t>(quantize_byte(rgb[k]));
      }
    }
  }
  return out;
}

/// Luma of an RGB image rounded to integer levels.
inline ImagePlane rgb_to_y_levels(const RgbImage& img) {
  return to_byte_levels(rgb_to_ycbcr(img).y);
}

}  // namespace srru
