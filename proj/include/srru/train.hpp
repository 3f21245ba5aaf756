#pragma once

// Losses, SGD with momentum, the step-halving schedule and the epoch loop.

#include <chrono>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "srru/config.hpp"
#include "srru/data.hpp"
#include "srru/model.hpp"

namespace srru {

template <typename T>
struct LossResult {
  double value = 0.0;
  Tensor<T> grad;
};

/// mean(sqrt(d^2 + eps^2)) with d = pred - target.
template <typename T>
LossResult<T> charbonnier_loss(const Tensor<T>& pred, const Tensor<T>& target, double eps = 1e-3) {
  if (pred.shape() != target.shape()) {
    throw ShapeError("charbonnier_loss: shape mismatch " + to_string(pred.shape()) + " vs " +
                     to_string(target.shape()));
  }
  LossResult<T> r{0.0, Tensor<T>(pred.shape())};
  const double inv_count = 1.0 / static_cast<double>(pred.size());
  const double eps2 = eps * eps;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = static_cast<double>(pred[i]) - static_cast<double>(target[i]);
    const double s = std::sqrt(d * d + eps2);
    r.value += s;
    r.grad[i] = static_cast<T>(d / s * inv_count);
  }
  r.value *= inv_count;
  return r;
}

/// mean(d^2).
template <typename T>
LossResult<T> l2_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  if (pred.shape() != target.shape()) {
    throw ShapeError("l2_loss: shape mismatch " + to_string(pred.shape()) + " vs " +
                     to_string(target.shape()));
  }
  LossResult<T> r{0.0, Tensor<T>(pred.shape())};
  const double inv_count = 1.0 / static_cast<double>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = static_cast<double>(pred[i]) - static_cast<double>(target[i]);
    r.value += d * d;
    r.grad[i] = static_cast<T>(2.0 * d * inv_count);
  }
  r.value *= inv_count;
  return r;
}

template <typename T>
LossResult<T> compute_loss(const TrainingConfig& cfg, const Tensor<T>& pred, const Tensor<T>& target) {
  return cfg.loss_kind == LossKind::Charbonnier ? charbonnier_loss(pred, target, cfg.charbonnier_eps)
                                                : l2_loss(pred, target);
}

/// base * 0.5^floor(epoch / halving_period)
inline double lr_schedule(std::size_t epoch, const TrainingConfig& cfg) {
  const auto halvings = static_cast<double>(epoch / cfg.lr_halving_epochs);
  return cfg.learning_rate * std::pow(0.5, halvings);
}

template <typename T>
struct OptimizerState {
  NetworkParams<T> velocity;  // mirrors the parameter layout exactly
  std::size_t step = 0;
  double learning_rate = 0.0;

  static OptimizerState for_params(const NetworkParams<T>& params) {
    return OptimizerState{zeros_like(params), 0, 0.0};
  }
};

struct SgdSettings {
  double learning_rate = 0.0;
  double momentum = 0.9;
  double weight_decay = 1e-4;
};

/// v <- momentum * v - lr * (g + wd * w);  w <- w + v.
/// Throws NumericalError naming the first parameter with a non-finite
/// gradient; no parameter is modified in that case.
template <typename T>
void sgd_step(NetworkParams<T>& params, const NetworkParams<T>& grads, OptimizerState<T>& state,
              const SgdSettings& s) {
  std::vector<const ConvParams<T>*> g_list;
  for_each_conv(grads, [&](const std::string&, const ConvParams<T>& g) { g_list.push_back(&g); });
  for_each_conv(grads, [&](const std::string& name, const ConvParams<T>& g) {
    if (!g.weights.all_finite()) throw NumericalError("non-finite gradient in " + name + ".weight");
    for (T b : g.bias)
      if (!std::isfinite(b)) throw NumericalError("non-finite gradient in " + name + ".bias");
  });
  std::vector<ConvParams<T>*> v_list;
  for_each_conv(state.velocity, [&](const std::string&, ConvParams<T>& v) { v_list.push_back(&v); });
  std::size_t i = 0;
  const T lr = static_cast<T>(s.learning_rate);
  const T mu = static_cast<T>(s.momentum);
  const T wd = static_cast<T>(s.weight_decay);
  for_each_conv(params, [&](const std::string& name, ConvParams<T>& w) {
    if (i >= g_list.size() || i >= v_list.size()) {
      throw ShapeError("sgd_step: parameter layout mismatch at " + name);
    }
    const ConvParams<T>& g = *g_list[i];
    ConvParams<T>& v = *v_list[i];
    require_dim("sgd_step " + name, "weights", w.weights.size(), g.weights.size());
    require_dim("sgd_step " + name, "velocity", w.weights.size(), v.weights.size());
    for (std::size_t k = 0; k < w.weights.size(); ++k) {
      v.weights[k] = mu * v.weights[k] - lr * (g.weights[k] + wd * w.weights[k]);
      w.weights[k] += v.weights[k];
    }
    // Biases are not decayed.
    for (std::size_t k = 0; k < w.bias.size(); ++k) {
      v.bias[k] = mu * v.bias[k] - lr * g.bias[k];
      w.bias[k] += v.bias[k];
    }
    ++i;
  });
  ++state.step;
  state.learning_rate = s.learning_rate;
}

template <typename T>
double gradient_norm(const NetworkParams<T>& grads) {
  double acc = 0.0;
  for_each_conv(grads, [&](const std::string&, const ConvParams<T>& g) {
    for (T v : g.weights.storage()) acc += static_cast<double>(v) * static_cast<double>(v);
    for (T v : g.bias) acc += static_cast<double>(v) * static_cast<double>(v);
  });
  return std::sqrt(acc);
}

template <typename T>
void scale_gradients(NetworkParams<T>& grads, double factor) {
  const T f = static_cast<T>(factor);
  for_each_conv(grads, [&](const std::string&, ConvParams<T>& g) {
    for (T& v : g.weights.storage()) v *= f;
    for (T& v : g.bias) v *= f;
  });
}

struct StepStats {
  double loss = 0.0;
  double grad_norm = 0.0;
};

/// Forward, deep-supervised loss (sum over pyramid levels), backward and
/// one SGD update.
template <typename T>
StepStats train_step(NetworkParams<T>& params, OptimizerState<T>& state, const Tensor<T>& lr_input,
                     const std::vector<Tensor<T>>& targets, const TrainingConfig& cfg,
                     double learning_rate) {
  NetworkCache<T> cache;
  const auto outputs = network_forward(lr_input, params, &cache);
  require_dim("train_step", "targets", outputs.size(), targets.size());
  StepStats st;
  std::vector<Tensor<T>> grads_out;
  for (std::size_t l = 0; l < outputs.size(); ++l) {
    auto loss = compute_loss(cfg, outputs[l], targets[l]);
    st.loss += loss.value;
    grads_out.push_back(std::move(loss.grad));
  }
  if (!std::isfinite(st.loss)) throw NumericalError("non-finite loss");
  NetworkParams<T> grads = zeros_like(params);
  network_backward(cache, params, grads_out, grads);
  st.grad_norm = gradient_norm(grads);
  if (cfg.grad_clip > 0.0 && st.grad_norm > cfg.grad_clip) {
    scale_gradients(grads, cfg.grad_clip / st.grad_norm);
  }
  sgd_step(params, grads, state, SgdSettings{learning_rate, cfg.momentum, cfg.weight_decay});
  return st;
}

struct EpochStats {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  double grad_norm = 0.0;  // mean over steps
  double learning_rate = 0.0;
  double wall_seconds = 0.0;
};

/// One epoch of `steps_per_epoch` batches drawn from the sampler.
inline EpochStats train_epoch(NetworkParams<float>& params, PatchSampler& sampler,
                              const TrainingConfig& cfg, OptimizerState<float>& state,
                              std::size_t epoch) {
  const auto start = std::chrono::steady_clock::now();
  EpochStats es;
  es.epoch = epoch;
  es.learning_rate = lr_schedule(epoch, cfg);
  for (std::size_t b = 0; b < cfg.steps_per_epoch; ++b) {
    const Batch batch = collate(sampler.next_batch(cfg.batch_size));
    StepStats st;
    try {
      st = train_step(params, state, batch.lr, batch.targets, cfg, es.learning_rate);
    } catch (const NumericalError& e) {
      throw NumericalError(std::string(e.what()) + " at epoch " + std::to_string(epoch) +
                           ", batch " + std::to_string(b));
    }
    es.mean_loss += st.loss;
    es.grad_norm += st.grad_norm;
  }
  const auto steps = static_cast<double>(std::max<std::size_t>(1, cfg.steps_per_epoch));
  es.mean_loss /= steps;
  es.grad_norm /= steps;
  es.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return es;
}

}  // namespace srru
