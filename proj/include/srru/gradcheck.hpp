#pragma once

// Central-difference gradient check of the full network in double precision.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "srru/model.hpp"
#include "srru/train.hpp"

namespace srru {

struct GradcheckConfig {
  ArchConfig arch{.channels = 8, .reduction = 4, .n_units = 2, .scale = 2};
  std::size_t batch = 1;
  std::size_t height = 8;
  std::size_t width = 8;
  double step = 1e-5;
  double tolerance = 1e-4;
  double charbonnier_eps = 1e-3;
  std::uint64_t seed = 7;
  /// Layer (e.g. "level0.unit.h2a") whose backward gets an off-by-one
  /// window. Empty for a clean check.
  std::string corrupt_layer;
};

struct LayerGradReport {
  std::string name;
  std::size_t count = 0;
  double max_rel_error = 0.0;
  double max_abs_grad = 0.0;
};

struct GradcheckReport {
  std::vector<LayerGradReport> layers;
  double max_rel_error = 0.0;
  std::string worst_layer;
  bool pass = false;
};

/// |a - n| / max(|a|, |n|, floor). The floor keeps entries whose true
/// gradient is at the finite-difference noise level from dominating.
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) /
         std::max({std::abs(analytic), std::abs(numeric), floor});
}

namespace detail {

struct GradcheckProblem {
  NetworkParams<double> params;
  Tensor<double> input;
  std::vector<Tensor<double>> targets;
  double eps;

  [[nodiscard]] double loss(const NetworkParams<double>& p) const {
    const auto outs = network_forward(input, p);
    double total = 0.0;
    for (std::size_t l = 0; l < outs.size(); ++l) {
      total += charbonnier_loss(outs[l], targets[l], eps).value;
    }
    return total;
  }
};

inline GradcheckProblem make_gradcheck_problem(const GradcheckConfig& cfg) {
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> noise(0.0, 0.05);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  GradcheckProblem pb{make_network<double>(cfg.arch, cfg.seed), {}, {}, cfg.charbonnier_eps};
  // Break the symmetry of bilinear kernels and zero biases.
  for_each_conv(pb.params, [&](const std::string&, ConvParams<double>& c) {
    for (auto& w : c.weights.storage()) w += noise(rng);
    for (auto& b : c.bias) b = noise(rng);
  });
  pb.input = Tensor<double>(cfg.batch, 1, cfg.height, cfg.width);
  for (auto& v : pb.input.storage()) v = unit(rng);
  std::size_t h = cfg.height, w = cfg.width;
  for (std::size_t l = 0; l < cfg.arch.levels(); ++l) {
    h *= 2;
    w *= 2;
    Tensor<double> t(cfg.batch, 1, h, w);
    for (auto& v : t.storage()) v = unit(rng);
    pb.targets.push_back(std::move(t));
  }
  return pb;
}

}  // namespace detail

/// Compares every parameter's analytic gradient with central differences.
inline GradcheckReport gradcheck(const GradcheckConfig& cfg) {
  validate(cfg.arch);
  detail::GradcheckProblem pb = detail::make_gradcheck_problem(cfg);

  NetworkCache<double> cache;
  const auto outs = network_forward(pb.input, pb.params, &cache);
  std::vector<Tensor<double>> g_out;
  for (std::size_t l = 0; l < outs.size(); ++l) {
    g_out.push_back(charbonnier_loss(outs[l], pb.targets[l], pb.eps).grad);
  }
  NetworkParams<double> analytic = zeros_like(pb.params);
  const BackwardOptions opts{cfg.corrupt_layer};
  network_backward(cache, pb.params, g_out, analytic, &opts);

  std::vector<std::pair<std::string, ConvParams<double>*>> grads;
  for_each_conv(analytic, [&](const std::string& n, ConvParams<double>& c) { grads.emplace_back(n, &c); });

  GradcheckReport report;
  std::size_t idx = 0;
  NetworkParams<double>& p = pb.params;
  for_each_conv(p, [&](const std::string& name, ConvParams<double>& conv) {
    const ConvParams<double>& g = *grads[idx++].second;
    LayerGradReport lr{name};
    auto check = [&](double& value, double analytic_grad) {
      const double saved = value;
      value = saved + cfg.step;
      const double up = pb.loss(p);
      value = saved - cfg.step;
      const double down = pb.loss(p);
      value = saved;
      const double numeric = (up - down) / (2.0 * cfg.step);
      lr.max_rel_error = std::max(lr.max_rel_error, relative_error(analytic_grad, numeric));
      lr.max_abs_grad = std::max(lr.max_abs_grad, std::abs(analytic_grad));
      ++lr.count;
    };
    for (std::size_t k = 0; k < conv.weights.size(); ++k) check(conv.weights[k], g.weights[k]);
    for (std::size_t k = 0; k < conv.bias.size(); ++k) check(conv.bias[k], g.bias[k]);
    if (lr.max_rel_error > report.max_rel_error) {
      report.max_rel_error = lr.max_rel_error;
      report.worst_layer = name;
    }
    report.layers.push_back(lr);
  });
  report.pass = report.max_rel_error < cfg.tolerance;
  return report;
}

}  // namespace srru
