#pragma once

// Independent test oracles: direct-loop layer implementations, a scalar
// bicubic resampler, and finite-difference helpers. Nothing here calls the
// production code paths it is used to check.

#include <cmath>
#include <cstddef>
#include <functional>
#include <random>
#include <vector>

#include "srru/tensor.hpp"

namespace oracle {

using srru::Tensor;

/// Direct 7-loop convolution; weights (out, in, k, k).
template <typename T>
Tensor<T> conv2d_direct(const Tensor<T>& x, const Tensor<T>& w, const std::vector<T>& b,
                        std::size_t stride, std::size_t pad) {
  const std::size_t kh = w.height(), kw = w.width();
  const std::size_t Ho = (x.height() + 2 * pad - kh) / stride + 1;
  const std::size_t Wo = (x.width() + 2 * pad - kw) / stride + 1;
  Tensor<T> y(x.batch(), w.batch(), Ho, Wo);
  for (std::size_t n = 0; n < x.batch(); ++n)
    for (std::size_t o = 0; o < w.batch(); ++o)
      for (std::size_t i = 0; i < Ho; ++i)
        for (std::size_t j = 0; j < Wo; ++j) {
          T acc = b[o];
          for (std::size_t c = 0; c < x.channels(); ++c)
            for (std::size_t ky = 0; ky < kh; ++ky)
              for (std::size_t kx = 0; kx < kw; ++kx) {
                const long iy = static_cast<long>(i * stride + ky) - static_cast<long>(pad);
                const long ix = static_cast<long>(j * stride + kx) - static_cast<long>(pad);
                if (iy < 0 || ix < 0 || iy >= static_cast<long>(x.height()) ||
                    ix >= static_cast<long>(x.width()))
                  continue;
                acc += w(o, c, ky, kx) * x(n, c, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix));
              }
          y(n, o, i, j) = acc;
        }
  return y;
}

/// Direct scatter form of the transposed convolution; weights (out, in, k, k).
template <typename T>
Tensor<T> conv_transpose2d_direct(const Tensor<T>& x, const Tensor<T>& w, const std::vector<T>& b,
                                  std::size_t stride, std::size_t pad) {
  const std::size_t k = w.height();
  const std::size_t Ho = (x.height() - 1) * stride + k - 2 * pad;
  const std::size_t Wo = (x.width() - 1) * stride + w.width() - 2 * pad;
  Tensor<T> y(x.batch(), w.batch(), Ho, Wo);
  for (std::size_t n = 0; n < x.batch(); ++n) {
    for (std::size_t o = 0; o < w.batch(); ++o)
      for (std::size_t i = 0; i < Ho; ++i)
        for (std::size_t j = 0; j < Wo; ++j) y(n, o, i, j) = b[o];
    for (std::size_t c = 0; c < x.channels(); ++c)
      for (std::size_t i = 0; i < x.height(); ++i)
        for (std::size_t j = 0; j < x.width(); ++j)
          for (std::size_t o = 0; o < w.batch(); ++o)
            for (std::size_t ky = 0; ky < k; ++ky)
              for (std::size_t kx = 0; kx < w.width(); ++kx) {
                const long oy = static_cast<long>(i * stride + ky) - static_cast<long>(pad);
                const long ox = static_cast<long>(j * stride + kx) - static_cast<long>(pad);
                if (oy < 0 || ox < 0 || oy >= static_cast<long>(Ho) || ox >= static_cast<long>(Wo))
                  continue;
                y(n, o, static_cast<std::size_t>(oy), static_cast<std::size_t>(ox)) +=
                    w(o, c, ky, kx) * x(n, c, i, j);
              }
  }
  return y;
}

/// Central differences of a scalar function w.r.t. every entry of `v`.
inline std::vector<double> numeric_gradient(const std::function<double()>& f, std::span<double> v,
                                            double h = 1e-5) {
  std::vector<double> g(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double saved = v[i];
    v[i] = saved + h;
    const double up = f();
    v[i] = saved - h;
    const double down = f();
    v[i] = saved;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

inline double max_relative_error(const std::vector<double>& a, const std::vector<double>& b,
                                 double floor = 1e-8) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double denom = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return worst;
}

template <typename T>
Tensor<T> random_tensor(srru::Shape s, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  Tensor<T> t(s);
  for (auto& v : t.storage()) v = static_cast<T>(d(rng));
  return t;
}

/// Scalar, loop-per-output-pixel bicubic resampler following the MATLAB
/// imresize contribution rule: Keys a = -0.5, kernel stretched by 1/scale
/// when antialiasing a downscale, mirror-symmetric borders.
class ScalarResampler {
 public:
  static double keys(double x) {
    x = std::fabs(x);
    if (x < 1.0) return (1.5 * x - 2.5) * x * x + 1.0;
    if (x < 2.0) return ((-0.5 * x + 2.5) * x - 4.0) * x + 2.0;
    return 0.0;
  }

  static long mirror(long i, long n) {
    // 1-based index into [1..n, n..1] repeated.
    const long period = 2 * n;
    long z = ((i - 1) % period + period) % period;
    return z < n ? z : period - 1 - z;
  }

  struct Taps {
    std::vector<long> idx;
    std::vector<double> w;
  };

  static Taps taps_for(long out_index, long in_len, double scale, bool antialias) {
    const bool aa = antialias && scale < 1.0;
    const double width = aa ? 4.0 / scale : 4.0;
    const double u = (out_index + 1) / scale + 0.5 * (1.0 - 1.0 / scale);
    const long first = static_cast<long>(std::floor(u - width / 2.0));
    const long count = static_cast<long>(std::ceil(width)) + 2;
    Taps t;
    double total = 0.0;
    for (long k = 0; k < count; ++k) {
      const long j = first + k;
      const double w = aa ? scale * keys(scale * (u - j)) : keys(u - j);
      t.idx.push_back(mirror(j, in_len));
      t.w.push_back(w);
      total += w;
    }
    for (auto& w : t.w) w /= total;
    return t;
  }

  /// src: h x w row-major. Output round(h*scale) x round(w*scale).
  static std::vector<double> resize(const std::vector<double>& src, long h, long w, double scale,
                                    bool antialias, long* out_h, long* out_w) {
    const long oh = std::lround(h * scale), ow = std::lround(w * scale);
    *out_h = oh;
    *out_w = ow;
    std::vector<double> out(static_cast<std::size_t>(oh * ow));
    for (long i = 0; i < oh; ++i) {
      const Taps ty = taps_for(i, h, scale, antialias);
      for (long j = 0; j < ow; ++j) {
        const Taps tx = taps_for(j, w, scale, antialias);
        double acc = 0.0;
        for (std::size_t a = 0; a < ty.idx.size(); ++a) {
          double row = 0.0;
          for (std::size_t b = 0; b < tx.idx.size(); ++b) {
            row += tx.w[b] * src[static_cast<std::size_t>(ty.idx[a] * w + tx.idx[b])];
          }
          acc += ty.w[a] * row;
        }
        out[static_cast<std::size_t>(i * ow + j)] = acc;
      }
    }
    return out;
  }
};

}  // namespace oracle
