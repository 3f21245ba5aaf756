#pragma once

// Differentiable primitive layers. Every forward op has an explicit backward
// companion; composition into networks happens in model.hpp.

#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "srru/parallel.hpp"
#include "srru/tensor.hpp"

namespace srru {

template <typename T>
struct ConvParams {
  Tensor<T> weights;  // (out_channels, in_channels, kh, kw)
  std::vector<T> bias;
  std::size_t stride = 1;
  std::size_t padding = 0;

  ConvParams() = default;
  ConvParams(std::size_t out_channels, std::size_t in_channels, std::size_t kernel,
             std::size_t stride_, std::size_t padding_)
      : weights(out_channels, in_channels, kernel, kernel),
        bias(out_channels, T(0)),
        stride(stride_),
        padding(padding_) {}

  [[nodiscard]] std::size_t out_channels() const noexcept { return weights.batch(); }
  [[nodiscard]] std::size_t in_channels() const noexcept { return weights.channels(); }
  [[nodiscard]] std::size_t kernel_h() const noexcept { return weights.height(); }
  [[nodiscard]] std::size_t kernel_w() const noexcept { return weights.width(); }
  [[nodiscard]] std::size_t param_count() const noexcept { return weights.size() + bias.size(); }

  /// Same geometry, all values zero. Used as a gradient accumulator.
  [[nodiscard]] ConvParams zeros_like() const {
    ConvParams z;
    z.weights = Tensor<T>(weights.shape());
    z.bias.assign(bias.size(), T(0));
    z.stride = stride;
    z.padding = padding;
    return z;
  }

  template <typename U>
  [[nodiscard]] ConvParams<U> cast() const {
    ConvParams<U> out;
    out.weights = weights.template cast<U>();
    out.bias.assign(bias.begin(), bias.end());
    out.stride = stride;
    out.padding = padding;
    return out;
  }

  friend bool operator==(const ConvParams&, const ConvParams&) = default;
};

namespace detail {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMatrix<T>>;

/// Geometry of a sliding window over one image. `cols_h x cols_w` is the
/// number of window positions; pad_top/pad_left may differ from `padding`
/// only for fault injection in gradient-check mutation tests.
struct WindowGeometry {
  std::size_t channels, height, width;
  std::size_t kernel_h, kernel_w;
  std::size_t stride;
  std::ptrdiff_t pad_top, pad_left;
  std::size_t cols_h, cols_w;

  [[nodiscard]] std::size_t rows() const { return channels * kernel_h * kernel_w; }
  [[nodiscard]] std::size_t cols() const { return cols_h * cols_w; }
};

template <typename T>
void im2col(std::span<const T> image, const WindowGeometry& g, std::vector<T>& cols) {
  cols.assign(g.rows() * g.cols(), T(0));
  const auto H = static_cast<std::ptrdiff_t>(g.height);
  const auto W = static_cast<std::ptrdiff_t>(g.width);
  std::size_t row = 0;
  for (std::size_t c = 0; c < g.channels; ++c) {
    const T* src = image.data() + c * g.height * g.width;
    for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
      for (std::size_t kx = 0; kx < g.kernel_w; ++kx, ++row) {
        T* dst = cols.data() + row * g.cols();
        for (std::size_t oy = 0; oy < g.cols_h; ++oy) {
          const std::ptrdiff_t iy =
              static_cast<std::ptrdiff_t>(oy * g.stride + ky) - g.pad_top;
          if (iy < 0 || iy >= H) continue;
          const T* src_row = src + iy * W;
          T* dst_row = dst + oy * g.cols_w;
          for (std::size_t ox = 0; ox < g.cols_w; ++ox) {
            const std::ptrdiff_t ix =
                static_cast<std::ptrdiff_t>(ox * g.stride + kx) - g.pad_left;
            if (ix >= 0 && ix < W) dst_row[ox] = src_row[ix];
          }
        }
      }
    }
  }
}

/// Adjoint of im2col: scatter-adds columns back into an image.
template <typename T>
void col2im(std::span<const T> cols, const WindowGeometry& g, std::span<T> image) {
  std::fill(image.begin(), image.end(), T(0));
  const auto H = static_cast<std::ptrdiff_t>(g.height);
  const auto W = static_cast<std::ptrdiff_t>(g.width);
  std::size_t row = 0;
  for (std::size_t c = 0; c < g.channels; ++c) {
    T* dst = image.data() + c * g.height * g.width;
    for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
      for (std::size_t kx = 0; kx < g.kernel_w; ++kx, ++row) {
        const T* src = cols.data() + row * g.cols();
        for (std::size_t oy = 0; oy < g.cols_h; ++oy) {
          const std::ptrdiff_t iy =
              static_cast<std::ptrdiff_t>(oy * g.stride + ky) - g.pad_top;
          if (iy < 0 || iy >= H) continue;
          T* dst_row = dst + iy * W;
          const T* src_row = src + oy * g.cols_w;
          for (std::size_t ox = 0; ox < g.cols_w; ++ox) {
            const std::ptrdiff_t ix =
                static_cast<std::ptrdiff_t>(ox * g.stride + kx) - g.pad_left;
            if (ix >= 0 && ix < W) dst_row[ix] += src_row[ox];
          }
        }
      }
    }
  }
}

inline std::size_t conv_out_dim(std::string_view what, std::string_view dim, std::size_t in,
                                std::size_t kernel, std::size_t stride, std::size_t pad) {
  if (stride == 0) throw ShapeError(std::string(what) + ": stride must be positive");
  if (in + 2 * pad < kernel) {
    throw ShapeError(std::string(what) + ": " + std::string(dim) + " " + std::to_string(in) +
                     " too small for kernel " + std::to_string(kernel));
  }
  return (in + 2 * pad - kernel) / stride + 1;
}

inline bool is_pointwise(std::size_t kh, std::size_t kw, std::size_t stride, std::size_t pad) {
  return kh == 1 && kw == 1 && stride == 1 && pad == 0;
}

/// Transposed-conv weights (out, in, k, k) rearranged to ((out,ky,kx), in).
template <typename T>
RowMatrix<T> transposed_weight_matrix(const ConvParams<T>& p) {
  const std::size_t out = p.out_channels(), in = p.in_channels();
  const std::size_t kk = p.kernel_h() * p.kernel_w();
  RowMatrix<T> m(out * kk, in);
  for (std::size_t o = 0; o < out; ++o)
    for (std::size_t i = 0; i < in; ++i)
      for (std::size_t k = 0; k < kk; ++k) m(o * kk + k, i) = p.weights[(o * in + i) * kk + k];
  return m;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// conv2d

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const ConvParams<T>& params) {
  require_dim("conv2d", "input channels", params.in_channels(), input.channels());
  if (params.bias.size() != params.out_channels()) {
    require_dim("conv2d", "bias length", params.out_channels(), params.bias.size());
  }
  const std::size_t kh = params.kernel_h(), kw = params.kernel_w();
  const std::size_t Ho =
      detail::conv_out_dim("conv2d", "height", input.height(), kh, params.stride, params.padding);
  const std::size_t Wo =
      detail::conv_out_dim("conv2d", "width", input.width(), kw, params.stride, params.padding);
  const std::size_t Cout = params.out_channels();
  Tensor<T> out(input.batch(), Cout, Ho, Wo);

  const detail::WindowGeometry g{input.channels(),
                                 input.height(),
                                 input.width(),
                                 kh,
                                 kw,
                                 params.stride,
                                 static_cast<std::ptrdiff_t>(params.padding),
                                 static_cast<std::ptrdiff_t>(params.padding),
                                 Ho,
                                 Wo};
  const detail::ConstMatMap<T> wmat(params.weights.data().data(), Cout, g.rows());
  const bool pointwise = detail::is_pointwise(kh, kw, params.stride, params.padding);

  parallel_for(input.batch(), [&](std::size_t n) {
    std::vector<T> cols;
    const T* colptr = input.sample(n).data();
    if (!pointwise) {
      detail::im2col(input.sample(n), g, cols);
      colptr = cols.data();
    }
    const detail::ConstMatMap<T> cmat(colptr, g.rows(), g.cols());
    detail::MatMap<T> ymat(out.sample(n).data(), Cout, g.cols());
    ymat.noalias() = wmat * cmat;
    for (std::size_t c = 0; c < Cout; ++c) ymat.row(c).array() += params.bias[c];
  });
  return out;
}

/// Backward of conv2d. Accumulates into `grads` and returns the input
/// gradient. `pad_skew` shifts the window used for the weight gradient and
/// exists only to inject a known fault in gradient-check mutation tests.
template <typename T>
Tensor<T> conv2d_backward(const Tensor<T>& input, const ConvParams<T>& params,
                          const Tensor<T>& grad_out, ConvParams<T>& grads, int pad_skew = 0) {
  const std::size_t kh = params.kernel_h(), kw = params.kernel_w();
  const std::size_t Cout = params.out_channels();
  require_dim("conv2d_backward", "grad channels", Cout, grad_out.channels());
  require_dim("conv2d_backward", "grad batch", input.batch(), grad_out.batch());
  const detail::WindowGeometry g{input.channels(),
                                 input.height(),
                                 input.width(),
                                 kh,
                                 kw,
                                 params.stride,
                                 static_cast<std::ptrdiff_t>(params.padding),
                                 static_cast<std::ptrdiff_t>(params.padding),
                                 grad_out.height(),
                                 grad_out.width()};
  detail::WindowGeometry gw = g;
  gw.pad_top += pad_skew;
  gw.pad_left += pad_skew;
  const bool pointwise = detail::is_pointwise(kh, kw, params.stride, params.padding) && pad_skew == 0;

  const detail::ConstMatMap<T> wmat(params.weights.data().data(), Cout, g.rows());
  Tensor<T> grad_in(input.shape());
  const std::size_t batch = input.batch();
  std::vector<std::vector<T>> dw(batch), db(batch);

  parallel_for(batch, [&](std::size_t n) {
    std::vector<T> cols;
    const T* colptr = input.sample(n).data();
    if (!pointwise) {
      detail::im2col(input.sample(n), gw, cols);
      colptr = cols.data();
    }
    const detail::ConstMatMap<T> cmat(colptr, g.rows(), g.cols());
    const detail::ConstMatMap<T> gy(grad_out.sample(n).data(), Cout, g.cols());

    dw[n].resize(Cout * g.rows());
    detail::MatMap<T> dwm(dw[n].data(), Cout, g.rows());
    dwm.noalias() = gy * cmat.transpose();
    db[n].resize(Cout);
    for (std::size_t c = 0; c < Cout; ++c) db[n][c] = gy.row(c).sum();

    if (pointwise) {
      detail::MatMap<T> gx(grad_in.sample(n).data(), g.rows(), g.cols());
      gx.noalias() = wmat.transpose() * gy;
    } else {
      std::vector<T> dcols(g.rows() * g.cols());
      detail::MatMap<T> dcm(dcols.data(), g.rows(), g.cols());
      dcm.noalias() = wmat.transpose() * gy;
      detail::col2im<T>(dcols, g, grad_in.sample(n));
    }
  });

  // Reduce in sample order so the result does not depend on worker count.
  auto gw_data = grads.weights.data();
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t i = 0; i < gw_data.size(); ++i) gw_data[i] += dw[n][i];
    for (std::size_t c = 0; c < Cout; ++c) grads.bias[c] += db[n][c];
  }
  return grad_in;
}

// ---------------------------------------------------------------------------
// conv_transpose2d: adjoint of a strided conv2d. Output size is
// (H - 1) * stride - 2 * padding + kernel.

inline std::size_t transposed_out_dim(std::size_t in, std::size_t kernel, std::size_t stride,
                                      std::size_t pad) {
  return (in - 1) * stride + kernel - 2 * pad;
}

template <typename T>
Tensor<T> conv_transpose2d(const Tensor<T>& input, const ConvParams<T>& params) {
  require_dim("conv_transpose2d", "input channels", params.in_channels(), input.channels());
  if (input.height() == 0 || input.width() == 0 || input.batch() == 0) {
    throw ShapeError("conv_transpose2d: input dimensions must be positive, got " +
                     to_string(input.shape()));
  }
  const std::size_t k = params.kernel_h();
  if ((input.height() - 1) * params.stride + k < 2 * params.padding + 1) {
    throw ShapeError("conv_transpose2d: padding too large for input");
  }
  const std::size_t Ho = transposed_out_dim(input.height(), k, params.stride, params.padding);
  const std::size_t Wo =
      transposed_out_dim(input.width(), params.kernel_w(), params.stride, params.padding);
  const std::size_t Cout = params.out_channels(), Cin = params.in_channels();
  Tensor<T> out(input.batch(), Cout, Ho, Wo);

  const detail::WindowGeometry g{Cout,
                                 Ho,
                                 Wo,
                                 k,
                                 params.kernel_w(),
                                 params.stride,
                                 static_cast<std::ptrdiff_t>(params.padding),
                                 static_cast<std::ptrdiff_t>(params.padding),
                                 input.height(),
                                 input.width()};
  const detail::RowMatrix<T> wt = detail::transposed_weight_matrix(params);

  parallel_for(input.batch(), [&](std::size_t n) {
    const detail::ConstMatMap<T> x(input.sample(n).data(), Cin, g.cols());
    std::vector<T> cols(g.rows() * g.cols());
    detail::MatMap<T> cm(cols.data(), g.rows(), g.cols());
    cm.noalias() = wt * x;
    auto y = out.sample(n);
    detail::col2im<T>(cols, g, y);
    for (std::size_t c = 0; c < Cout; ++c) {
      for (auto& v : out.plane(n, c)) v += params.bias[c];
    }
  });
  return out;
}

template <typename T>
Tensor<T> conv_transpose2d_backward(const Tensor<T>& input, const ConvParams<T>& params,
                                    const Tensor<T>& grad_out, ConvParams<T>& grads,
                                    int pad_skew = 0) {
  const std::size_t Cout = params.out_channels(), Cin = params.in_channels();
  const std::size_t k = params.kernel_h(), kw = params.kernel_w();
  require_dim("conv_transpose2d_backward", "grad channels", Cout, grad_out.channels());
  const detail::WindowGeometry g{Cout,
                                 grad_out.height(),
                                 grad_out.width(),
                                 k,
                                 kw,
                                 params.stride,
                                 static_cast<std::ptrdiff_t>(params.padding),
                                 static_cast<std::ptrdiff_t>(params.padding),
                                 input.height(),
                                 input.width()};
  detail::WindowGeometry gw = g;
  gw.pad_top += pad_skew;
  gw.pad_left += pad_skew;
  const detail::RowMatrix<T> wt = detail::transposed_weight_matrix(params);
  const std::size_t batch = input.batch();
  Tensor<T> grad_in(input.shape());
  std::vector<std::vector<T>> dwt(batch), db(batch);

  parallel_for(batch, [&](std::size_t n) {
    std::vector<T> cols;
    detail::im2col(grad_out.sample(n), g, cols);
    const detail::ConstMatMap<T> cm(cols.data(), g.rows(), g.cols());
    detail::MatMap<T> gx(grad_in.sample(n).data(), Cin, g.cols());
    gx.noalias() = wt.transpose() * cm;

    if (pad_skew != 0) detail::im2col(grad_out.sample(n), gw, cols);
    const detail::ConstMatMap<T> cw(cols.data(), g.rows(), g.cols());
    const detail::ConstMatMap<T> x(input.sample(n).data(), Cin, g.cols());
    dwt[n].resize(g.rows() * Cin);
    detail::MatMap<T> dm(dwt[n].data(), g.rows(), Cin);
    dm.noalias() = cw * x.transpose();
    db[n].assign(Cout, T(0));
    for (std::size_t c = 0; c < Cout; ++c) {
      for (T v : grad_out.plane(n, c)) db[n][c] += v;
    }
  });

  const std::size_t kk = k * kw;
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t o = 0; o < Cout; ++o)
      for (std::size_t i = 0; i < Cin; ++i)
        for (std::size_t q = 0; q < kk; ++q)
          grads.weights[(o * Cin + i) * kk + q] += dwt[n][(o * kk + q) * Cin + i];
    for (std::size_t c = 0; c < Cout; ++c) grads.bias[c] += db[n][c];
  }
  return grad_in;
}

// ---------------------------------------------------------------------------
// Pointwise activations

template <typename T>
Tensor<T> lrelu(const Tensor<T>& input, T slope) {
  Tensor<T> out(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) {
    const T x = input[i];
    out[i] = x >= T(0) ? x : slope * x;
  }
  return out;
}

template <typename T>
Tensor<T> lrelu_backward(const Tensor<T>& input, const Tensor<T>& grad_out, T slope) {
  Tensor<T> g(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) {
    g[i] = input[i] >= T(0) ? grad_out[i] : slope * grad_out[i];
  }
  return g;
}

/// Overflow-safe logistic; results are kept strictly inside (0, 1).
template <typename T>
T sigmoid_scalar(T x) {
  constexpr T lo = std::numeric_limits<T>::min();
  constexpr T hi = T(1) - std::numeric_limits<T>::epsilon() / T(2);
  T y;
  if (x >= T(0)) {
    y = T(1) / (T(1) + std::exp(-x));
  } else {
    const T e = std::exp(x);
    y = e / (T(1) + e);
  }
  return std::clamp(y, lo, hi);
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& input) {
  Tensor<T> out(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) out[i] = sigmoid_scalar(input[i]);
  return out;
}

/// Takes the forward output, not the input.
template <typename T>
Tensor<T> sigmoid_backward(const Tensor<T>& output, const Tensor<T>& grad_out) {
  Tensor<T> g(output.shape());
  for (std::size_t i = 0; i < output.size(); ++i) {
    g[i] = grad_out[i] * output[i] * (T(1) - output[i]);
  }
  return g;
}

// ---------------------------------------------------------------------------
// Pooling, concatenation, channel scaling

template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& input) {
  if (input.height() == 0 || input.width() == 0) {
    throw ShapeError("global_avg_pool: spatial dimensions must be positive");
  }
  Tensor<T> out(input.batch(), input.channels(), 1, 1);
  const T inv = T(1) / static_cast<T>(input.shape().plane());
  for (std::size_t n = 0; n < input.batch(); ++n) {
    for (std::size_t c = 0; c < input.channels(); ++c) {
      T acc = 0;
      for (T v : input.plane(n, c)) acc += v;
      out(n, c, 0, 0) = acc * inv;
    }
  }
  return out;
}

template <typename T>
Tensor<T> global_avg_pool_backward(const Shape& input_shape, const Tensor<T>& grad_out) {
  Tensor<T> g(input_shape);
  const T inv = T(1) / static_cast<T>(input_shape.plane());
  for (std::size_t n = 0; n < input_shape.batch; ++n) {
    for (std::size_t c = 0; c < input_shape.channels; ++c) {
      const T v = grad_out(n, c, 0, 0) * inv;
      for (auto& x : g.plane(n, c)) x = v;
    }
  }
  return g;
}

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  require_dim("concat_channels", "batch", a.batch(), b.batch());
  require_dim("concat_channels", "height", a.height(), b.height());
  require_dim("concat_channels", "width", a.width(), b.width());
  Tensor<T> out(a.batch(), a.channels() + b.channels(), a.height(), a.width());
  for (std::size_t n = 0; n < a.batch(); ++n) {
    auto dst = out.sample(n);
    auto sa = a.sample(n);
    auto sb = b.sample(n);
    std::copy(sa.begin(), sa.end(), dst.begin());
    std::copy(sb.begin(), sb.end(), dst.begin() + static_cast<std::ptrdiff_t>(sa.size()));
  }
  return out;
}

/// Inverse of concat_channels: the first `first_channels` channels, then the rest.
template <typename T>
std::pair<Tensor<T>, Tensor<T>> split_channels(const Tensor<T>& x, std::size_t first_channels) {
  if (first_channels > x.channels()) {
    throw ShapeError("split_channels: split point " + std::to_string(first_channels) +
                     " exceeds channels " + std::to_string(x.channels()));
  }
  Tensor<T> a(x.batch(), first_channels, x.height(), x.width());
  Tensor<T> b(x.batch(), x.channels() - first_channels, x.height(), x.width());
  for (std::size_t n = 0; n < x.batch(); ++n) {
    auto src = x.sample(n);
    auto da = a.sample(n);
    auto dbs = b.sample(n);
    std::copy(src.begin(), src.begin() + static_cast<std::ptrdiff_t>(da.size()), da.begin());
    std::copy(src.begin() + static_cast<std::ptrdiff_t>(da.size()), src.end(), dbs.begin());
  }
  return {std::move(a), std::move(b)};
}

template <typename T>
Tensor<T> channel_scale(const Tensor<T>& input, const Tensor<T>& factors) {
  require_dim("channel_scale", "batch", input.batch(), factors.batch());
  require_dim("channel_scale", "channels", input.channels(), factors.channels());
  require_dim("channel_scale", "factor height", 1, factors.height());
  require_dim("channel_scale", "factor width", 1, factors.width());
  Tensor<T> out(input.shape());
  for (std::size_t n = 0; n < input.batch(); ++n) {
    for (std::size_t c = 0; c < input.channels(); ++c) {
      const T f = factors(n, c, 0, 0);
      auto src = input.plane(n, c);
      auto dst = out.plane(n, c);
      for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] * f;
    }
  }
  return out;
}

/// Returns {grad_input, grad_factors}.
template <typename T>
std::pair<Tensor<T>, Tensor<T>> channel_scale_backward(const Tensor<T>& input,
                                                       const Tensor<T>& factors,
                                                       const Tensor<T>& grad_out) {
  Tensor<T> gx(input.shape());
  Tensor<T> gf(factors.shape());
  for (std::size_t n = 0; n < input.batch(); ++n) {
    for (std::size_t c = 0; c < input.channels(); ++c) {
      const T f = factors(n, c, 0, 0);
      auto x = input.plane(n, c);
      auto g = grad_out.plane(n, c);
      auto dx = gx.plane(n, c);
      T acc = 0;
      for (std::size_t i = 0; i < x.size(); ++i) {
        dx[i] = g[i] * f;
        acc += g[i] * x[i];
      }
      gf(n, c, 0, 0) = acc;
    }
  }
  return {std::move(gx), std::move(gf)};
}

// ---------------------------------------------------------------------------
// Initialization

/// Zero-mean normal samples with std sqrt(2 / fan_in).
template <typename T>
std::vector<T> he_normal(std::size_t count, std::size_t fan_in, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
  std::vector<T> out(count);
  for (auto& v : out) v = static_cast<T>(dist(rng));
  return out;
}

/// He-initializes the weights in place and zeroes the bias.
template <typename T>
void he_init(ConvParams<T>& params, std::uint64_t seed) {
  const std::size_t fan_in = params.in_channels() * params.kernel_h() * params.kernel_w();
  params.weights.storage() = he_normal<T>(params.weights.size(), fan_in, seed);
  std::fill(params.bias.begin(), params.bias.end(), T(0));
}

/// 1-D bilinear upsampling taps for a kernel of the given size.
inline std::vector<double> bilinear_taps(std::size_t kernel) {
  const double f = std::ceil(static_cast<double>(kernel) / 2.0);
  const double c = (2.0 * f - 1.0 - std::fmod(f, 2.0)) / (2.0 * f);
  std::vector<double> taps(kernel);
  for (std::size_t i = 0; i < kernel; ++i) {
    taps[i] = 1.0 - std::abs(static_cast<double>(i) / f - c);
  }
  return taps;
}

/// Sets every (out, in) kernel slice to the bilinear kernel times `gain`.
template <typename T>
void bilinear_init(ConvParams<T>& params, double gain = 1.0) {
  const auto taps = bilinear_taps(params.kernel_h());
  const std::size_t k = params.kernel_h();
  for (std::size_t o = 0; o < params.out_channels(); ++o)
    for (std::size_t i = 0; i < params.in_channels(); ++i)
      for (std::size_t y = 0; y < k; ++y)
        for (std::size_t x = 0; x < k; ++x)
          params.weights(o, i, y, x) = static_cast<T>(gain * taps[y] * taps[x]);
  std::fill(params.bias.begin(), params.bias.end(), T(0));
}

}  // namespace srru
