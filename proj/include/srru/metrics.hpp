#pragma once

// PSNR and SSIM on 8-bit luma planes with border shaving.

#include <cmath>
#include <cstddef>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "srru/image.hpp"

namespace srru {

struct MetricReport {
  std::string image_id;
  std::size_t scale = 0;
  std::size_t shave = 0;
  double psnr = 0.0;  // dB, +inf for identical inputs
  double ssim = 0.0;
};

namespace detail {

inline void require_same_dims(std::string_view what, const ImagePlane& a, const ImagePlane& b) {
  require_dim(what, "height", a.height, b.height);
  require_dim(what, "width", a.width, b.width);
}

/// Quantize to byte levels, then shave.
inline ImagePlane prepare_for_metric(const ImagePlane& img, std::size_t shave) {
  const ImagePlane q = to_byte_levels(img);
  return shave == 0 ? q : shave_border(q, shave);
}

inline std::vector<double> gaussian_window(std::size_t size, double sigma) {
  std::vector<double> w(size);
  const double c = (static_cast<double>(size) - 1.0) / 2.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < size; ++i) {
    const double d = static_cast<double>(i) - c;
    w[i] = std::exp(-d * d / (2.0 * sigma * sigma));
    sum += w[i];
  }
  for (auto& v : w) v /= sum;
  return w;
}

/// 'valid' separable filtering of a row-major plane.
inline std::vector<double> filter_valid(const std::vector<double>& src, std::size_t h,
                                        std::size_t w, const std::vector<double>& k) {
  const std::size_t n = k.size();
  const std::size_t oh = h - n + 1, ow = w - n + 1;
  std::vector<double> tmp(h * ow);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (std::size_t t = 0; t < n; ++t) acc += k[t] * src[y * w + x + t];
      tmp[y * ow + x] = acc;
    }
  std::vector<double> out(oh * ow);
  for (std::size_t y = 0; y < oh; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (std::size_t t = 0; t < n; ++t) acc += k[t] * tmp[(y + t) * ow + x];
      out[y * ow + x] = acc;
    }
  return out;
}

}  // namespace detail

/// 10 log10(255^2 / MSE) on rounded 8-bit planes after removing `shave`
/// pixels per border. Returns +inf when the planes agree.
inline double psnr_y(const ImagePlane& ref, const ImagePlane& test, std::size_t shave) {
  detail::require_same_dims("psnr_y", ref, test);
  const ImagePlane a = detail::prepare_for_metric(ref, shave);
  const ImagePlane b = detail::prepare_for_metric(test, shave);
  double sse = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    sse += d * d;
  }
  if (sse == 0.0) return std::numeric_limits<double>::infinity();
  const double mse = sse / static_cast<double>(a.size());
  return 10.0 * std::log10(255.0 * 255.0 / mse);
}

struct SsimOptions {
  std::size_t window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 255.0;
};

/// Mean SSIM over all valid window positions.
inline double ssim_y(const ImagePlane& ref, const ImagePlane& test, std::size_t shave,
                     const SsimOptions& opt = {}) {
  detail::require_same_dims("ssim_y", ref, test);
  const ImagePlane a = detail::prepare_for_metric(ref, shave);
  const ImagePlane b = detail::prepare_for_metric(test, shave);
  if (a.height < opt.window || a.width < opt.window) {
    throw ShapeError("ssim_y: image " + std::to_string(a.height) + "x" + std::to_string(a.width) +
                     " smaller than the " + std::to_string(opt.window) + "px window");
  }
  const double c1 = (opt.k1 * opt.dynamic_range) * (opt.k1 * opt.dynamic_range);
  const double c2 = (opt.k2 * opt.dynamic_range) * (opt.k2 * opt.dynamic_range);
  const auto win = detail::gaussian_window(opt.window, opt.sigma);
  const std::size_t h = a.height, w = a.width;

  std::vector<double> aa(a.size()), bb(a.size()), ab(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    aa[i] = a.data[i] * a.data[i];
    bb[i] = b.data[i] * b.data[i];
    ab[i] = a.data[i] * b.data[i];
  }
  const auto mu_a = detail::filter_valid(a.data, h, w, win);
  const auto mu_b = detail::filter_valid(b.data, h, w, win);
  const auto e_aa = detail::filter_valid(aa, h, w, win);
  const auto e_bb = detail::filter_valid(bb, h, w, win);
  const auto e_ab = detail::filter_valid(ab, h, w, win);

  double total = 0.0;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    const double ma2 = mu_a[i] * mu_a[i];
    const double mb2 = mu_b[i] * mu_b[i];
    const double mab = mu_a[i] * mu_b[i];
    const double va = e_aa[i] - ma2;
    const double vb = e_bb[i] - mb2;
    const double cov = e_ab[i] - mab;
    total += ((2.0 * mab + c1) * (2.0 * cov + c2)) / ((ma2 + mb2 + c1) * (va + vb + c2));
  }
  return total / static_cast<double>(mu_a.size());
}

inline MetricReport evaluate_pair(const std::string& id, std::size_t scale, const ImagePlane& ref,
                                  const ImagePlane& test, std::size_t shave) {
  return MetricReport{id, scale, shave, psnr_y(ref, test, shave), ssim_y(ref, test, shave)};
}

/// Means over finite PSNR values; SSIM mean over all rows.
inline MetricReport mean_report(const std::vector<MetricReport>& rows, const std::string& id) {
  MetricReport m;
  m.image_id = id;
  if (rows.empty()) return m;
  m.scale = rows.front().scale;
  m.shave = rows.front().shave;
  double ps = 0.0, ss = 0.0;
  std::size_t finite = 0;
  for (const auto& r : rows) {
    if (std::isfinite(r.psnr)) {
      ps += r.psnr;
      ++finite;
    }
    ss += r.ssim;
  }
  m.psnr = finite > 0 ? ps / static_cast<double>(finite) : std::numeric_limits<double>::infinity();
  m.ssim = ss / static_cast<double>(rows.size());
  return m;
}

inline void write_metric_csv(std::ostream& os, const std::vector<MetricReport>& rows) {
  os << "image_id,scale,psnr_db,ssim\n";
  os << std::fixed;
  for (const auto& r : rows) {
    os << r.image_id << ',' << r.scale << ',' << std::setprecision(4) << r.psnr << ','
       << std::setprecision(6) << r.ssim << '\n';
  }
}

}  // namespace srru
