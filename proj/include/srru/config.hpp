#pragma once

// Training configuration and its `key = value` text format.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "srru/model.hpp"

namespace srru {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class LossKind { Charbonnier, L2 };
enum class OptimizerKind { Sgd };

struct TrainingConfig {
  // Architecture
  std::size_t scale = 2;
  std::size_t n_units = 6;
  std::size_t channels = 64;
  std::size_t reduction_ratio = 4;
  double lrelu_slope = 0.2;
  bool attention_enabled = true;
  bool fusion_enabled = true;
  bool learnable_identity_branch = false;

  // Optimization
  double learning_rate = 1e-5;
  std::size_t lr_halving_epochs = 80;
  std::size_t batch_size = 64;
  std::size_t patch_size = 128;  // HR patch
  std::size_t epochs = 400;
  std::size_t steps_per_epoch = 1000;
  LossKind loss_kind = LossKind::Charbonnier;
  double charbonnier_eps = 1e-3;
  OptimizerKind optimizer_kind = OptimizerKind::Sgd;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  double grad_clip = 0.0;  // global-norm clip; 0 disables
  std::uint64_t rng_seed = 1;
  bool augment = true;

  // Data and output
  std::string corpus = "synthetic";  // directory, or "synthetic" to generate one
  std::string val_corpus = "synthetic";
  std::size_t synthetic_count = 16;
  std::size_t synthetic_size = 128;
  std::size_t val_count = 6;
  std::string output_dir = "run";
  std::size_t checkpoint_every = 1;  // numbered checkpoint period, epochs

  [[nodiscard]] ArchConfig arch() const {
    ArchConfig a;
    a.channels = channels;
    a.reduction = reduction_ratio;
    a.n_units = n_units;
    a.scale = scale;
    a.slope = lrelu_slope;
    a.attention = attention_enabled;
    a.fusion = fusion_enabled;
    a.learnable_identity = learnable_identity_branch;
    return a;
  }

  friend bool operator==(const TrainingConfig&, const TrainingConfig&) = default;
};

/// The shipped desk-scale preset: small enough to train on a CPU in minutes.
inline TrainingConfig desk_preset() {
  TrainingConfig c;
  c.scale = 2;
  c.channels = 16;
  c.n_units = 2;
  c.patch_size = 48;
  c.batch_size = 8;
  c.epochs = 300;
  c.steps_per_epoch = 1;
  c.lr_halving_epochs = 100;
  c.learning_rate = 0.02;
  c.synthetic_count = 16;
  c.synthetic_size = 128;
  c.val_count = 6;
  c.checkpoint_every = 100;
  c.output_dir = "desk_run";
  return c;
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  std::istringstream is(v);
  T out{};
  is >> out;
  if (!is || !is.eof()) throw ConfigError("invalid value '" + v + "' for key '" + key + "'");
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("invalid boolean '" + v + "' for key '" + key + "'");
}

/// Shortest text that parses back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

struct Field {
  std::function<void(TrainingConfig&, const std::string&)> set;
  std::function<std::string(const TrainingConfig&)> get;
};

#define SRRU_SIZE_FIELD(name)                                                                  \
  {                                                                                            \
#name, Field {                                                                             \
      [](TrainingConfig& c, const std::string& v) { c.name = parse_number<std::size_t>(#name, v); }, \
          [](const TrainingConfig& c) { return std::to_string(c.name); }                       \
    }                                                                                          \
  }
#define SRRU_DOUBLE_FIELD(name)                                                                \
  {                                                                                            \
#name, Field {                                                                             \
      [](TrainingConfig& c, const std::string& v) { c.name = parse_number<double>(#name, v); }, \
          [](const TrainingConfig& c) { return format_double(c.name); }                        \
    }                                                                                          \
  }
#define SRRU_BOOL_FIELD(name)                                                                  \
  {                                                                                            \
#name, Field {                                                                             \
      [](TrainingConfig& c, const std::string& v) { c.name = parse_bool(#name, v); },          \
          [](const TrainingConfig& c) { return std::string(c.name ? "true" : "false"); }       \
    }                                                                                          \
  }
#define SRRU_STRING_FIELD(name)                                                                \
  {                                                                                            \
#name, Field {                                                                             \
      [](TrainingConfig& c, const std::string& v) { c.name = v; },                             \
          [](const TrainingConfig& c) { return c.name; }                                       \
    }                                                                                          \
  }

/// Ordered key table; order defines the canonical text layout.
inline const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = {
      SRRU_SIZE_FIELD(scale),
      SRRU_SIZE_FIELD(n_units),
      SRRU_SIZE_FIELD(channels),
      SRRU_SIZE_FIELD(reduction_ratio),
      SRRU_DOUBLE_FIELD(lrelu_slope),
      SRRU_BOOL_FIELD(attention_enabled),
      SRRU_BOOL_FIELD(fusion_enabled),
      SRRU_BOOL_FIELD(learnable_identity_branch),
      SRRU_DOUBLE_FIELD(learning_rate),
      SRRU_SIZE_FIELD(lr_halving_epochs),
      SRRU_SIZE_FIELD(batch_size),
      SRRU_SIZE_FIELD(patch_size),
      SRRU_SIZE_FIELD(epochs),
      SRRU_SIZE_FIELD(steps_per_epoch),
      {"loss_kind",
       Field{[](TrainingConfig& c, const std::string& v) {
               if (v == "charbonnier") {
                 c.loss_kind = LossKind::Charbonnier;
               } else if (v == "l2") {
                 c.loss_kind = LossKind::L2;
               } else {
                 throw ConfigError("invalid loss_kind '" + v + "' (charbonnier or l2)");
               }
             },
             [](const TrainingConfig& c) {
               return std::string(c.loss_kind == LossKind::Charbonnier ? "charbonnier" : "l2");
             }}},
      SRRU_DOUBLE_FIELD(charbonnier_eps),
      {"optimizer_kind",
       Field{[](TrainingConfig& c, const std::string& v) {
               if (v != "sgd") throw ConfigError("invalid optimizer_kind '" + v + "' (sgd)");
               c.optimizer_kind = OptimizerKind::Sgd;
             },
             [](const TrainingConfig&) { return std::string("sgd"); }}},
      SRRU_DOUBLE_FIELD(momentum),
      SRRU_DOUBLE_FIELD(weight_decay),
      SRRU_DOUBLE_FIELD(grad_clip),
      {"rng_seed",
       Field{[](TrainingConfig& c, const std::string& v) {
               c.rng_seed = parse_number<std::uint64_t>("rng_seed", v);
             },
             [](const TrainingConfig& c) { return std::to_string(c.rng_seed); }}},
      SRRU_BOOL_FIELD(augment),
      SRRU_STRING_FIELD(corpus),
      SRRU_STRING_FIELD(val_corpus),
      SRRU_SIZE_FIELD(synthetic_count),
      SRRU_SIZE_FIELD(synthetic_size),
      SRRU_SIZE_FIELD(val_count),
      SRRU_STRING_FIELD(output_dir),
      SRRU_SIZE_FIELD(checkpoint_every),
  };
  return table;
}

#undef SRRU_SIZE_FIELD
#undef SRRU_DOUBLE_FIELD
#undef SRRU_BOOL_FIELD
#undef SRRU_STRING_FIELD

}  // namespace detail

inline std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, f] : detail::fields()) keys.push_back(k);
  return keys;
}

inline void set_config_value(TrainingConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& [k, f] : detail::fields()) {
    if (k == key) {
      f.set(cfg, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

inline std::string get_config_value(const TrainingConfig& cfg, const std::string& key) {
  for (const auto& [k, f] : detail::fields()) {
    if (k == key) return f.get(cfg);
  }
  throw ConfigError("unknown config key '" + key + "'");
}

/// Applies `k=v` (or `k = v`).
inline void apply_override(TrainingConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not key=value");
  set_config_value(cfg, detail::trim(assignment.substr(0, eq)),
                   detail::trim(assignment.substr(eq + 1)));
}

/// Parses `key = value` lines; `#` starts a comment. Keys absent from the
/// text keep their values from `base`.
inline TrainingConfig parse_config(std::istream& is, TrainingConfig base = {}) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line.find('=') == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    }
    apply_override(base, line);
  }
  return base;
}

inline TrainingConfig parse_config_text(const std::string& text, TrainingConfig base = {}) {
  std::istringstream is(text);
  return parse_config(is, std::move(base));
}

inline TrainingConfig load_config_file(const std::string& path, TrainingConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return parse_config(in, std::move(base));
}

/// Canonical text: every key, one `key = value` per line, table order.
inline std::string config_to_text(const TrainingConfig& cfg) {
  std::ostringstream os;
  for (const auto& [k, f] : detail::fields()) os << k << " = " << f.get(cfg) << "\n";
  return os.str();
}

inline void validate(const TrainingConfig& cfg) {
  validate(cfg.arch());
  if (cfg.patch_size == 0 || cfg.patch_size % cfg.scale != 0) {
    throw ConfigError("patch_size must be a positive multiple of scale");
  }
  if (cfg.batch_size == 0) throw ConfigError("batch_size must be positive");
  if (cfg.lr_halving_epochs == 0) throw ConfigError("lr_halving_epochs must be positive");
  if (cfg.learning_rate < 0.0) throw ConfigError("learning_rate must be non-negative");
  if (!(cfg.charbonnier_eps > 0.0)) throw ConfigError("charbonnier_eps must be positive");
}

}  // namespace srru
