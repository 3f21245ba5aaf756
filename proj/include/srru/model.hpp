#pragma once

// The recursive super-resolution network: channel attention, the fused
// recursive unit (shared across recursions), and the two-branch pyramid
// level. Forward passes optionally record a cache consumed by the matching
// backward pass.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "srru/layers.hpp"
#include "srru/resample.hpp"
#include "srru/tensor.hpp"

namespace srru {

class UnsupportedScaleError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct ArchConfig {
  std::size_t channels = 64;
  std::size_t reduction = 4;
  std::size_t n_units = 6;
  std::size_t scale = 2;
  double slope = 0.2;
  bool attention = true;
  bool fusion = true;
  bool learnable_identity = false;  // second transposed conv replaces bicubic

  [[nodiscard]] std::size_t levels() const {
    if (scale == 2) return 1;
    if (scale == 4) return 2;
    throw UnsupportedScaleError("unsupported scale " + std::to_string(scale) +
                                " (supported: 2, 4)");
  }

  friend bool operator==(const ArchConfig&, const ArchConfig&) = default;
};

inline void validate(const ArchConfig& arch) {
  (void)arch.levels();
  if (arch.channels == 0) throw std::invalid_argument("channels must be positive");
  if (arch.attention && (arch.reduction == 0 || arch.channels % arch.reduction != 0)) {
    throw std::invalid_argument("channels " + std::to_string(arch.channels) +
                                " not divisible by reduction ratio " +
                                std::to_string(arch.reduction));
  }
  if (!(arch.slope > 0.0 && arch.slope < 1.0)) {
    throw std::invalid_argument("lrelu slope must lie in (0, 1)");
  }
}

template <typename T>
struct AttentionParams {
  ConvParams<T> reduce;  // 1x1, C -> C/r
  ConvParams<T> expand;  // 1x1, C/r -> C
  std::size_t ratio = 4;
};

template <typename T>
struct UnitParams {
  AttentionParams<T> attention;
  ConvParams<T> h1a, h1b;  // 3x3, C -> C
  ConvParams<T> h2a, h2b;  // 3x3, 2C -> 2C (C -> C without fusion)
  ConvParams<T> h3;        // 1x1, 4C -> C (absent without fusion)
};

template <typename T>
struct LevelParams {
  ConvParams<T> feature;            // 3x3, 1 -> C
  UnitParams<T> unit;               // shared by every recursion
  ConvParams<T> upsample;           // transposed 4x4/s2/p1, C -> 1
  ConvParams<T> identity_upsample;  // transposed 4x4/s2/p1, 1 -> 1; empty unless learnable
};

template <typename T>
struct NetworkParams {
  ArchConfig arch;
  std::vector<LevelParams<T>> levels;
};

// ---------------------------------------------------------------------------
// Parameter enumeration

/// Visits every non-empty conv of a level with a stable dotted name.
template <typename Level, typename Fn>
void for_each_conv(Level& level, const std::string& prefix, Fn&& fn) {
  auto visit = [&](auto& conv, const char* name) {
    if (conv.weights.size() > 0) fn(prefix + name, conv);
  };
  visit(level.feature, "feature");
  visit(level.unit.attention.reduce, "unit.att_reduce");
  visit(level.unit.attention.expand, "unit.att_expand");
  visit(level.unit.h1a, "unit.h1a");
  visit(level.unit.h1b, "unit.h1b");
  visit(level.unit.h2a, "unit.h2a");
  visit(level.unit.h2b, "unit.h2b");
  visit(level.unit.h3, "unit.h3");
  visit(level.upsample, "upsample");
  visit(level.identity_upsample, "identity_upsample");
}

inline std::string level_prefix(std::size_t level) {
  return "level" + std::to_string(level) + ".";
}

template <typename Net, typename Fn>
void for_each_conv(Net& net, Fn&& fn) {
  for (std::size_t l = 0; l < net.levels.size(); ++l) {
    for_each_conv(net.levels[l], level_prefix(l), fn);
  }
}

template <typename T>
std::size_t param_count(const AttentionParams<T>& a) {
  return a.reduce.param_count() + a.expand.param_count();
}

template <typename T>
std::size_t param_count(const NetworkParams<T>& net) {
  std::size_t total = 0;
  for_each_conv(net, [&](const std::string&, const ConvParams<T>& c) { total += c.param_count(); });
  return total;
}

template <typename T>
NetworkParams<T> zeros_like(const NetworkParams<T>& net) {
  NetworkParams<T> z = net;
  for_each_conv(z, [](const std::string&, ConvParams<T>& c) {
    c.weights.fill(T(0));
    std::fill(c.bias.begin(), c.bias.end(), T(0));
  });
  return z;
}

template <typename U, typename T>
NetworkParams<U> cast_params(const NetworkParams<T>& net) {
  NetworkParams<U> out;
  out.arch = net.arch;
  for (const auto& lv : net.levels) {
    LevelParams<U> l;
    l.feature = lv.feature.template cast<U>();
    l.unit.attention.reduce = lv.unit.attention.reduce.template cast<U>();
    l.unit.attention.expand = lv.unit.attention.expand.template cast<U>();
    l.unit.attention.ratio = lv.unit.attention.ratio;
    l.unit.h1a = lv.unit.h1a.template cast<U>();
    l.unit.h1b = lv.unit.h1b.template cast<U>();
    l.unit.h2a = lv.unit.h2a.template cast<U>();
    l.unit.h2b = lv.unit.h2b.template cast<U>();
    l.unit.h3 = lv.unit.h3.template cast<U>();
    l.upsample = lv.upsample.template cast<U>();
    l.identity_upsample = lv.identity_upsample.template cast<U>();
    out.levels.push_back(std::move(l));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Construction

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}
}  // namespace detail

/// Builds one level with the given architecture. Convs get He init; the
/// transposed convs start as bilinear upsamplers.
template <typename T>
LevelParams<T> make_level(const ArchConfig& arch, std::uint64_t& seed_state) {
  const std::size_t C = arch.channels;
  LevelParams<T> lv;
  lv.feature = ConvParams<T>(C, 1, 3, 1, 1);
  if (arch.attention) {
    lv.unit.attention.ratio = arch.reduction;
    lv.unit.attention.reduce = ConvParams<T>(C / arch.reduction, C, 1, 1, 0);
    lv.unit.attention.expand = ConvParams<T>(C, C / arch.reduction, 1, 1, 0);
  }
  lv.unit.h1a = ConvParams<T>(C, C, 3, 1, 1);
  lv.unit.h1b = ConvParams<T>(C, C, 3, 1, 1);
  if (arch.fusion) {
    lv.unit.h2a = ConvParams<T>(2 * C, 2 * C, 3, 1, 1);
    lv.unit.h2b = ConvParams<T>(2 * C, 2 * C, 3, 1, 1);
    lv.unit.h3 = ConvParams<T>(C, 4 * C, 1, 1, 0);
  } else {
    lv.unit.h2a = ConvParams<T>(C, C, 3, 1, 1);
    lv.unit.h2b = ConvParams<T>(C, C, 3, 1, 1);
  }
  lv.upsample = ConvParams<T>(1, C, 4, 2, 1);
  if (arch.learnable_identity) lv.identity_upsample = ConvParams<T>(1, 1, 4, 2, 1);

  for_each_conv(lv, std::string{}, [&](const std::string& name, ConvParams<T>& c) {
    const std::uint64_t s = detail::splitmix64(seed_state);
    if (name == "upsample") {
      bilinear_init(c, 1.0 / static_cast<double>(C));
    } else if (name == "identity_upsample") {
      bilinear_init(c);
    } else {
      he_init(c, s);
    }
  });
  return lv;
}

template <typename T>
NetworkParams<T> make_network(const ArchConfig& arch, std::uint64_t seed) {
  validate(arch);
  NetworkParams<T> net;
  net.arch = arch;
  std::uint64_t state = seed;
  for (std::size_t l = 0; l < arch.levels(); ++l) net.levels.push_back(make_level<T>(arch, state));
  return net;
}

// ---------------------------------------------------------------------------
// Channel attention

template <typename T>
struct AttentionCache {
  Tensor<T> input;
  Tensor<T> pooled;   // (N, C, 1, 1)
  Tensor<T> reduced;  // pre-activation of the reduction layer
  Tensor<T> beta;     // calibration factors in (0, 1)
};

/// Returns beta * input, with beta computed from the channel means.
template <typename T>
Tensor<T> attention_forward(const Tensor<T>& input, const AttentionParams<T>& params, T slope,
                            AttentionCache<T>* cache = nullptr) {
  require_dim("attention_forward", "channels", params.reduce.in_channels(), input.channels());
  if (params.ratio == 0 || input.channels() % params.ratio != 0) {
    throw ShapeError("attention_forward: channels " + std::to_string(input.channels()) +
                     " not divisible by reduction ratio " + std::to_string(params.ratio));
  }
  Tensor<T> pooled = global_avg_pool(input);
  Tensor<T> reduced = conv2d(pooled, params.reduce);
  Tensor<T> beta = sigmoid(conv2d(lrelu(reduced, slope), params.expand));
  Tensor<T> out = channel_scale(input, beta);
  if (cache != nullptr) {
    cache->input = input;
    cache->pooled = std::move(pooled);
    cache->reduced = std::move(reduced);
    cache->beta = std::move(beta);
  }
  return out;
}

template <typename T>
Tensor<T> attention_backward(const AttentionCache<T>& cache, const AttentionParams<T>& params,
                             T slope, const Tensor<T>& grad_out, AttentionParams<T>& grads) {
  auto [gx, gbeta] = channel_scale_backward(cache.input, cache.beta, grad_out);
  const Tensor<T> gexp = sigmoid_backward(cache.beta, gbeta);
  const Tensor<T> act = lrelu(cache.reduced, slope);
  const Tensor<T> gact = conv2d_backward(act, params.expand, gexp, grads.expand);
  const Tensor<T> gred = lrelu_backward(cache.reduced, gact, slope);
  const Tensor<T> gpool = conv2d_backward(cache.pooled, params.reduce, gred, grads.reduce);
  gx += global_avg_pool_backward(cache.input.shape(), gpool);
  return gx;
}

// ---------------------------------------------------------------------------
// Recursive unit

/// Names a layer whose backward pass should use a skewed window; used only
/// by gradient-check mutation tests.
struct BackwardOptions {
  std::string corrupt_layer;
};

namespace detail {
inline int skew_for(const BackwardOptions* opts, const std::string& name) {
  return (opts != nullptr && opts->corrupt_layer == name) ? 1 : 0;
}
}  // namespace detail

template <typename T>
struct UnitCache {
  const UnitParams<T>* params = nullptr;  // storage actually read by this recursion
  AttentionCache<T> attention;
  Tensor<T> original;  // R^o
  Tensor<T> t1;        // pre-activation after h1a
  Tensor<T> shallow;   // h1 output
  Tensor<T> fused1;    // R^c1 (or shallow without fusion)
  Tensor<T> t2;        // pre-activation after h2a
  Tensor<T> deep;      // h2 output
  Tensor<T> fused2;    // R^c2
};

template <typename T>
Tensor<T> unit_forward(const Tensor<T>& u_prev, const Tensor<T>& u0, const UnitParams<T>& params,
                       const ArchConfig& arch, UnitCache<T>* cache = nullptr) {
  if (u_prev.shape() != u0.shape()) {
    throw ShapeError("unit_forward: u_prev " + to_string(u_prev.shape()) + " vs u0 " +
                     to_string(u0.shape()));
  }
  const T slope = static_cast<T>(arch.slope);
  UnitCache<T> local;
  UnitCache<T>& c = cache != nullptr ? *cache : local;
  c.params = &params;

  c.original = arch.attention ? attention_forward(u_prev, params.attention, slope, &c.attention)
                              : u_prev;
  c.t1 = conv2d(lrelu(c.original, slope), params.h1a);
  c.shallow = conv2d(lrelu(c.t1, slope), params.h1b);
  c.fused1 = arch.fusion ? concat_channels(c.original, c.shallow) : c.shallow;
  c.t2 = conv2d(lrelu(c.fused1, slope), params.h2a);
  c.deep = conv2d(lrelu(c.t2, slope), params.h2b);
  if (arch.fusion) {
    c.fused2 = concat_channels(c.fused1, c.deep);
    return conv2d(lrelu(c.fused2, slope), params.h3) + u0;
  }
  return c.deep + u0;
}

/// Returns the gradient w.r.t. u_prev; the gradient w.r.t. u0 equals grad_out.
template <typename T>
Tensor<T> unit_backward(const UnitCache<T>& c, const UnitParams<T>& params, const ArchConfig& arch,
                        const Tensor<T>& grad_out, UnitParams<T>& grads,
                        const std::string& prefix = {}, const BackwardOptions* opts = nullptr) {
  const T slope = static_cast<T>(arch.slope);
  auto skew = [&](const char* name) { return detail::skew_for(opts, prefix + name); };

  Tensor<T> g_deep;
  Tensor<T> g_fused1;
  if (arch.fusion) {
    const Tensor<T> a3 = lrelu(c.fused2, slope);
    const Tensor<T> g_a3 = conv2d_backward(a3, params.h3, grad_out, grads.h3, skew("unit.h3"));
    const Tensor<T> g_fused2 = lrelu_backward(c.fused2, g_a3, slope);
    auto split = split_channels(g_fused2, c.fused1.channels());
    g_fused1 = std::move(split.first);
    g_deep = std::move(split.second);
  } else {
    g_deep = grad_out;
  }

  const Tensor<T> a2b = lrelu(c.t2, slope);
  const Tensor<T> g_a2b = conv2d_backward(a2b, params.h2b, g_deep, grads.h2b, skew("unit.h2b"));
  const Tensor<T> g_t2 = lrelu_backward(c.t2, g_a2b, slope);
  const Tensor<T> a2a = lrelu(c.fused1, slope);
  const Tensor<T> g_a2a = conv2d_backward(a2a, params.h2a, g_t2, grads.h2a, skew("unit.h2a"));
  Tensor<T> g_f1_direct = lrelu_backward(c.fused1, g_a2a, slope);
  if (arch.fusion) {
    g_fused1 += g_f1_direct;
  } else {
    g_fused1 = std::move(g_f1_direct);
  }

  Tensor<T> g_shallow;
  Tensor<T> g_original;
  if (arch.fusion) {
    auto split = split_channels(g_fused1, c.original.channels());
    g_original = std::move(split.first);
    g_shallow = std::move(split.second);
  } else {
    g_shallow = std::move(g_fused1);
    g_original = Tensor<T>(c.original.shape());
  }

  const Tensor<T> a1b = lrelu(c.t1, slope);
  const Tensor<T> g_a1b = conv2d_backward(a1b, params.h1b, g_shallow, grads.h1b, skew("unit.h1b"));
  const Tensor<T> g_t1 = lrelu_backward(c.t1, g_a1b, slope);
  const Tensor<T> a1a = lrelu(c.original, slope);
  const Tensor<T> g_a1a = conv2d_backward(a1a, params.h1a, g_t1, grads.h1a, skew("unit.h1a"));
  g_original += lrelu_backward(c.original, g_a1a, slope);

  if (!arch.attention) return g_original;
  return attention_backward(c.attention, params.attention, slope, g_original, grads.attention);
}

// ---------------------------------------------------------------------------
// Pyramid level and full network

template <typename T>
struct LevelCache {
  Tensor<T> input;  // I_lr
  Tensor<T> u0;
  std::vector<UnitCache<T>> units;
  Tensor<T> un;  // U_n
};

/// One x2 level: I_hr = F_up1(U_n) + F_up2(I_lr).
template <typename T>
Tensor<T> level_forward(const Tensor<T>& y_lr, const LevelParams<T>& params, const ArchConfig& arch,
                        LevelCache<T>* cache = nullptr) {
  require_dim("level_forward", "input channels", 1, y_lr.channels());
  const T slope = static_cast<T>(arch.slope);
  LevelCache<T> local;
  LevelCache<T>& c = cache != nullptr ? *cache : local;
  c.input = y_lr;
  c.u0 = conv2d(y_lr, params.feature);
  c.units.assign(arch.n_units, UnitCache<T>{});
  Tensor<T> u = c.u0;
  for (std::size_t k = 0; k < arch.n_units; ++k) {
    u = unit_forward(u, c.u0, params.unit, arch, cache != nullptr ? &c.units[k] : nullptr);
  }
  c.un = u;
  Tensor<T> residual = conv_transpose2d(lrelu(u, slope), params.upsample);
  Tensor<T> identity = arch.learnable_identity ? conv_transpose2d(y_lr, params.identity_upsample)
                                               : bicubic_upscale(y_lr, 2);
  return residual + identity;
}

/// Accumulates parameter gradients and returns the gradient w.r.t. I_lr.
template <typename T>
Tensor<T> level_backward(const LevelCache<T>& c, const LevelParams<T>& params,
                         const ArchConfig& arch, const Tensor<T>& grad_out, LevelParams<T>& grads,
                         const std::string& prefix = {}, const BackwardOptions* opts = nullptr) {
  const T slope = static_cast<T>(arch.slope);
  auto skew = [&](const char* name) { return detail::skew_for(opts, prefix + name); };

  Tensor<T> g_input =
      arch.learnable_identity
          ? conv_transpose2d_backward(c.input, params.identity_upsample, grad_out,
                                      grads.identity_upsample, skew("identity_upsample"))
          : bicubic_upscale_backward(c.input.shape(), grad_out, 2);

  const Tensor<T> act = lrelu(c.un, slope);
  Tensor<T> g_u = lrelu_backward(
      c.un,
      conv_transpose2d_backward(act, params.upsample, grad_out, grads.upsample, skew("upsample")),
      slope);

  Tensor<T> g_u0(c.u0.shape());
  for (std::size_t k = arch.n_units; k-- > 0;) {
    g_u0 += g_u;
    g_u = unit_backward(c.units[k], params.unit, arch, g_u, grads.unit, prefix, opts);
  }
  g_u0 += g_u;
  g_input += conv2d_backward(c.input, params.feature, g_u0, grads.feature, skew("feature"));
  return g_input;
}

template <typename T>
struct NetworkCache {
  std::vector<LevelCache<T>> levels;
};

/// Returns one output per pyramid level (x2, then x4).
template <typename T>
std::vector<Tensor<T>> network_forward(const Tensor<T>& y_lr, const NetworkParams<T>& params,
                                       NetworkCache<T>* cache = nullptr) {
  const std::size_t levels = params.arch.levels();
  if (params.levels.size() != levels) {
    throw ShapeError("network_forward: parameter set has " + std::to_string(params.levels.size()) +
                     " levels, scale requires " + std::to_string(levels));
  }
  if (cache != nullptr) cache->levels.assign(levels, LevelCache<T>{});
  std::vector<Tensor<T>> outputs;
  outputs.reserve(levels);
  const Tensor<T>* input = &y_lr;
  for (std::size_t l = 0; l < levels; ++l) {
    outputs.push_back(level_forward(*input, params.levels[l], params.arch,
                                    cache != nullptr ? &cache->levels[l] : nullptr));
    input = &outputs.back();
  }
  return outputs;
}

/// grad_outputs[l] is dLoss/dOutput_l; an empty tensor means no direct loss
/// at that level. Returns the gradient w.r.t. the network input.
template <typename T>
Tensor<T> network_backward(const NetworkCache<T>& cache, const NetworkParams<T>& params,
                           const std::vector<Tensor<T>>& grad_outputs, NetworkParams<T>& grads,
                           const BackwardOptions* opts = nullptr) {
  const std::size_t levels = cache.levels.size();
  require_dim("network_backward", "grad outputs", levels, grad_outputs.size());
  Tensor<T> carry;
  for (std::size_t l = levels; l-- > 0;) {
    Tensor<T> g = grad_outputs[l].empty() ? Tensor<T>() : grad_outputs[l];
    if (!carry.empty()) {
      if (g.empty()) {
        g = std::move(carry);
      } else {
        g += carry;
      }
    }
    if (g.empty()) {
      throw ShapeError("network_backward: no gradient reaches level " + std::to_string(l));
    }
    carry = level_backward(cache.levels[l], params.levels[l], params.arch, g, grads.levels[l],
                           level_prefix(l), opts);
  }
  return carry;
}

/// Inference convenience: final (highest-scale) output only.
template <typename T>
Tensor<T> super_resolve(const Tensor<T>& y_lr, const NetworkParams<T>& params) {
  return network_forward(y_lr, params).back();
}

}  // namespace srru
