#pragma once

// The CLI subcommands as library functions. Each returns a process exit
// code; run_guarded maps exceptions onto the exit-code contract.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "srru/checkpoint.hpp"
#include "srru/config.hpp"
#include "srru/data.hpp"
#include "srru/gradcheck.hpp"
#include "srru/image_io.hpp"
#include "srru/metrics.hpp"
#include "srru/model.hpp"
#include "srru/resample.hpp"
#include "srru/train.hpp"

namespace srru {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNumerical = 3;

/// Runs `body`, printing any error to `err` and mapping it to an exit code.
inline int run_guarded(std::ostream& err, const std::function<int()>& body) {
  try {
    return body();
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::invalid_argument& e) {  // config, shape and scale errors
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const CorpusError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}

// ---------------------------------------------------------------------------
// Shared helpers

namespace detail {

inline constexpr std::uint64_t kValSeedOffset = 1000;

inline std::filesystem::path resolve_corpus(const std::string& source, const std::filesystem::path& out_dir,
                                            const std::string& name, std::size_t count,
                                            std::size_t size, std::uint64_t seed, Split split) {
  if (source != "synthetic") return source;
  const auto dir = out_dir / name;
  make_synthetic_corpus(dir, count, size, seed, split);
  return dir;
}

/// Y plane of every image, cropped to a multiple of `scale`.
struct EvalImage {
  std::string id;
  ImagePlane hr;  // byte levels
};

inline std::vector<EvalImage> load_eval_set(const std::filesystem::path& dir, std::size_t scale) {
  const CorpusManifest m = load_corpus(dir, Split::Test);
  std::vector<EvalImage> out;
  for (const auto& e : m.entries) {
    out.push_back(EvalImage{e.id(), modcrop(read_image(m.root / e.path).luma(), scale)});
  }
  return out;
}

/// LR input as seen at evaluation time: antialiased bicubic downscale,
/// quantized to 8-bit like a stored LR image.
inline ImagePlane eval_lr(const ImagePlane& hr, std::size_t scale) {
  return to_byte_levels(synthesize_lr(hr, scale));
}

inline ImagePlane network_upscale(const ImagePlane& lr, const NetworkParams<float>& params) {
  const Tensor<float> out = super_resolve(to_tensor<float>(lr), params);
  return from_tensor(out, 0, 0);
}

/// Bicubic baseline. At x2 this is the same tensor path the network's
/// identity branch uses, so a zero-residual model reproduces it exactly.
inline ImagePlane bicubic_baseline(const ImagePlane& lr, std::size_t scale) {
  if (scale == 2) return from_tensor(bicubic_upscale(to_tensor<float>(lr), 2), 0, 0);
  ImagePlane unit = rescale_range(lr, ValueRange::Unit);
  return bicubic_resize(unit, static_cast<double>(scale), false);
}

struct ValidationResult {
  double psnr = 0.0;
  double ssim = 0.0;
  double bicubic_psnr = 0.0;
  double bicubic_ssim = 0.0;
};

inline ValidationResult validate_model(const std::vector<EvalImage>& set, const NetworkParams<float>& params,
                                       std::size_t scale) {
  std::vector<MetricReport> net_rows, bic_rows;
  for (const auto& img : set) {
    const ImagePlane lr = eval_lr(img.hr, scale);
    net_rows.push_back(evaluate_pair(img.id, scale, img.hr, network_upscale(lr, params), scale));
    bic_rows.push_back(evaluate_pair(img.id, scale, img.hr, bicubic_baseline(lr, scale), scale));
  }
  const auto a = mean_report(net_rows, "mean"), b = mean_report(bic_rows, "mean");
  return ValidationResult{a.psnr, a.ssim, b.psnr, b.ssim};
}

inline std::string epoch_checkpoint_name(std::size_t epoch) {
  std::ostringstream os;
  os << "epoch_" << std::setw(4) << std::setfill('0') << epoch << ".srru";
  return os.str();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// train

struct TrainOptions {
  TrainingConfig config;
  std::optional<std::filesystem::path> resume;  // checkpoint to continue from
  std::vector<std::string> overrides;           // applied on top of a resumed config
  bool validate = true;                         // held-out PSNR after the last epoch
};

struct TrainSummary {
  std::size_t first_epoch = 0;
  std::size_t epochs_run = 0;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  std::filesystem::path latest_checkpoint;
  std::optional<detail::ValidationResult> validation;
  NetworkParams<float> params;
};

/// Trains per the config, writing `latest.srru` every epoch, numbered
/// checkpoints every `checkpoint_every` epochs and `train_log.csv`.
inline TrainSummary run_training(const TrainOptions& opt, std::ostream& log) {
  namespace fs = std::filesystem;
  TrainingConfig cfg = opt.config;
  Checkpoint state;
  std::size_t first_epoch = 0;
  if (opt.resume) {
    state = load_checkpoint(*opt.resume);
    cfg = state.config;
    for (const auto& o : opt.overrides) apply_override(cfg, o);
    if (cfg.arch() != state.config.arch()) {
      throw ConfigError("architecture overrides are not allowed when resuming");
    }
    first_epoch = state.epoch;
  }
  validate(cfg);
  log << "# effective config\n" << config_to_text(cfg) << std::flush;

  const fs::path out_dir = cfg.output_dir;
  fs::create_directories(out_dir);
  {
    std::ofstream ec(out_dir / "effective_config.txt");
    ec << config_to_text(cfg);
  }

  const auto train_dir = detail::resolve_corpus(cfg.corpus, out_dir, "synthetic_train", cfg.synthetic_count,
                                                cfg.synthetic_size, cfg.rng_seed, Split::Train);
  const CorpusManifest manifest = load_corpus(train_dir, Split::Train);
  for (const auto& n : manifest.notes) log << "note: " << n << "\n";
  std::vector<std::string> ids;
  for (const auto& e : manifest.entries) ids.push_back(e.id());
  PatchSampler sampler(load_luma_planes(manifest), ids, cfg.patch_size, cfg.scale, cfg.rng_seed, cfg.augment);

  if (!opt.resume) {
    state.config = cfg;
    state.params = make_network<float>(cfg.arch(), cfg.rng_seed);
    state.optimizer = OptimizerState<float>::for_params(state.params);
    state.epoch = 0;
  } else {
    state.config = cfg;
    // Replay the sampler so a resumed run sees the same batches as an
    // uninterrupted one.
    for (std::size_t b = 0; b < first_epoch * cfg.steps_per_epoch; ++b) sampler.next_batch(cfg.batch_size);
  }

  const fs::path log_path = out_dir / "train_log.csv";
  const bool fresh_log = !opt.resume || !fs::exists(log_path);
  std::ofstream csv(log_path, fresh_log ? std::ios::trunc : std::ios::app);
  if (!csv) throw IoError("cannot write '" + log_path.string() + "'");
  if (fresh_log) csv << "epoch,loss,lr,wall_s\n";

  TrainSummary summary;
  summary.first_epoch = first_epoch;
  summary.latest_checkpoint = out_dir / "latest.srru";
  for (std::size_t epoch = first_epoch; epoch < cfg.epochs; ++epoch) {
    const EpochStats es = train_epoch(state.params, sampler, cfg, state.optimizer, epoch);
    if (summary.epochs_run == 0) summary.initial_loss = es.mean_loss;
    summary.final_loss = es.mean_loss;
    ++summary.epochs_run;
    csv << epoch + 1 << ',' << std::setprecision(9) << es.mean_loss << ',' << es.learning_rate << ','
        << std::setprecision(4) << es.wall_seconds << '\n';
    state.epoch = epoch + 1;
    save_checkpoint(summary.latest_checkpoint, state);
    if (state.epoch % cfg.checkpoint_every == 0 || state.epoch == cfg.epochs) {
      save_checkpoint(out_dir / detail::epoch_checkpoint_name(state.epoch), state);
    }
    const std::size_t every = std::max<std::size_t>(1, cfg.epochs / 10);
    if (state.epoch % every == 0 || state.epoch == cfg.epochs) {
      log << "epoch " << state.epoch << "/" << cfg.epochs << "  loss " << std::setprecision(6) << es.mean_loss
          << "  lr " << es.learning_rate << "  grad_norm " << es.grad_norm << "\n"
          << std::flush;
    }
  }
  if (summary.epochs_run == 0) save_checkpoint(summary.latest_checkpoint, state);

  if (opt.validate) {
    const auto val_dir =
        detail::resolve_corpus(cfg.val_corpus, out_dir, "synthetic_val", cfg.val_count, cfg.synthetic_size,
                               cfg.rng_seed + detail::kValSeedOffset, Split::Test);
    const auto v = detail::validate_model(detail::load_eval_set(val_dir, cfg.scale), state.params, cfg.scale);
    log << std::fixed << std::setprecision(3) << "validation x" << cfg.scale << ": model " << v.psnr
        << " dB / " << std::setprecision(4) << v.ssim << ", bicubic " << std::setprecision(3)
        << v.bicubic_psnr << " dB / " << std::setprecision(4) << v.bicubic_ssim << ", gain "
        << std::setprecision(3) << v.psnr - v.bicubic_psnr << " dB\n"
        << std::defaultfloat;
    std::ofstream vf(out_dir / "validation.txt");
    vf << std::setprecision(9) << "psnr_db = " << v.psnr << "\nssim = " << v.ssim
       << "\nbicubic_psnr_db = " << v.bicubic_psnr << "\nbicubic_ssim = " << v.bicubic_ssim << "\n";
    summary.validation = v;
  }
  summary.params = std::move(state.params);
  return summary;
}

inline int cmd_train(const TrainOptions& opt, std::ostream& out) {
  const TrainSummary s = run_training(opt, out);
  out << "trained " << s.epochs_run << " epochs; loss " << s.initial_loss << " -> " << s.final_loss
      << "; checkpoint " << s.latest_checkpoint.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// eval

struct EvalOptions {
  std::optional<std::filesystem::path> checkpoint;
  std::filesystem::path corpus;
  std::size_t scale = 2;
  bool bicubic_only = false;
  std::optional<std::filesystem::path> csv;  // per-image + mean rows
};

struct EvalResult {
  std::vector<MetricReport> rows;     // model (or bicubic when bicubic_only), then "mean"
  std::vector<MetricReport> bicubic;  // baseline column, then "mean"
};

inline EvalResult run_eval(const EvalOptions& opt) {
  if (opt.scale != 2 && opt.scale != 4) {
    throw UnsupportedScaleError("unsupported scale " + std::to_string(opt.scale) + " (supported: 2, 4)");
  }
  std::optional<Checkpoint> ck;
  if (!opt.bicubic_only) {
    if (!opt.checkpoint) throw ConfigError("eval needs --ckpt unless --bicubic-only is given");
    ck = load_checkpoint(*opt.checkpoint);
    if (ck->config.scale != opt.scale) {
      throw ConfigError("checkpoint was trained for x" + std::to_string(ck->config.scale) +
                        " but --scale is " + std::to_string(opt.scale));
    }
  }
  EvalResult r;
  for (const auto& img : detail::load_eval_set(opt.corpus, opt.scale)) {
    const ImagePlane lr = detail::eval_lr(img.hr, opt.scale);
    const ImagePlane bic = detail::bicubic_baseline(lr, opt.scale);
    r.bicubic.push_back(evaluate_pair(img.id, opt.scale, img.hr, bic, opt.scale));
    if (ck) r.rows.push_back(evaluate_pair(img.id, opt.scale, img.hr, detail::network_upscale(lr, ck->params), opt.scale));
  }
  if (!ck) r.rows = r.bicubic;
  r.rows.push_back(mean_report(r.rows, "mean"));
  r.bicubic.push_back(mean_report(r.bicubic, "mean"));
  return r;
}

inline void print_eval_table(std::ostream& out, const EvalResult& r, bool bicubic_only) {
  const char* label = bicubic_only ? "bicubic" : "model";
  out << std::left << std::setw(16) << "image" << std::right << std::setw(12) << (std::string(label) + " dB")
      << std::setw(10) << "ssim" << std::setw(14) << "bicubic dB" << std::setw(10) << "ssim" << "\n";
  out << std::fixed;
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    out << std::left << std::setw(16) << r.rows[i].image_id << std::right << std::setprecision(2) << std::setw(12)
        << r.rows[i].psnr << std::setprecision(4) << std::setw(10) << r.rows[i].ssim << std::setprecision(2)
        << std::setw(14) << r.bicubic[i].psnr << std::setprecision(4) << std::setw(10) << r.bicubic[i].ssim
        << "\n";
  }
  out << std::defaultfloat;
}

inline int cmd_eval(const EvalOptions& opt, std::ostream& out) {
  const EvalResult r = run_eval(opt);
  print_eval_table(out, r, opt.bicubic_only);
  if (opt.csv) {
    std::ofstream f(*opt.csv);
    if (!f) throw IoError("cannot write '" + opt.csv->string() + "'");
    write_metric_csv(f, r.rows);
    if (!opt.bicubic_only) {
      auto bic_path = *opt.csv;
      bic_path.replace_filename(opt.csv->stem().string() + "_bicubic" + opt.csv->extension().string());
      std::ofstream b(bic_path);
      write_metric_csv(b, r.bicubic);
    }
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// infer

struct InferOptions {
  std::filesystem::path checkpoint;
  std::filesystem::path input;
  std::filesystem::path output;
};

inline int cmd_infer(const InferOptions& opt, std::ostream& out) {
  const Checkpoint ck = load_checkpoint(opt.checkpoint);
  const DecodedImage img = read_image(opt.input);
  const std::size_t s = ck.config.scale;
  if (img.grayscale()) {
    ImagePlane y = img.luma();
    write_png(opt.output, detail::network_upscale(y, ck.params));
  } else {
    const YCbCrPlanes ycc = rgb_to_ycbcr(img.to_rgb());
    const ImagePlane y = rescale_range(detail::network_upscale(ycc.y, ck.params), ValueRange::Byte);
    const ImagePlane cb = bicubic_resize(ycc.cb, static_cast<double>(s), false);
    const ImagePlane cr = bicubic_resize(ycc.cr, static_cast<double>(s), false);
    write_png(opt.output, ycbcr_to_rgb(y, cb, cr));
  }
  out << "wrote " << opt.output.string() << " (" << img.width * s << "x" << img.height * s << ")\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// gradcheck

inline GradcheckConfig gradcheck_config_from(const TrainingConfig& cfg) {
  GradcheckConfig g;
  g.arch = cfg.arch();
  g.charbonnier_eps = cfg.charbonnier_eps;
  g.seed = cfg.rng_seed;
  if (g.arch.channels > 8 || g.arch.n_units > 2) {
    throw ConfigError("gradcheck needs a tiny model (channels <= 8, n_units <= 2)");
  }
  return g;
}

inline int cmd_gradcheck(const GradcheckConfig& cfg, std::ostream& out) {
  if (cfg.height > 8 || cfg.width > 8) throw ConfigError("gradcheck input must be at most 8x8");
  if (!cfg.corrupt_layer.empty()) {
    bool known = false;
    const auto net = make_network<double>(cfg.arch, cfg.seed);
    for_each_conv(net, [&](const std::string& name, const auto&) { known = known || name == cfg.corrupt_layer; });
    if (!known) throw ConfigError("no layer named '" + cfg.corrupt_layer + "'");
  }
  const auto start = std::chrono::steady_clock::now();
  const GradcheckReport r = gradcheck(cfg);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  out << std::left << std::setw(28) << "parameter" << std::right << std::setw(8) << "count" << std::setw(14)
      << "max rel err" << "\n";
  for (const auto& l : r.layers) {
    out << std::left << std::setw(28) << l.name << std::right << std::setw(8) << l.count << std::setw(14)
        << std::scientific << std::setprecision(3) << l.max_rel_error << std::defaultfloat << "\n";
  }
  out << (r.pass ? "PASS" : "FAIL") << ": max relative error " << std::scientific << std::setprecision(3)
      << r.max_rel_error << std::defaultfloat << " (" << r.worst_layer << "), tolerance " << cfg.tolerance
      << ", " << std::fixed << std::setprecision(1) << secs << " s\n"
      << std::defaultfloat;
  return r.pass ? kExitOk : kExitNumerical;
}

// ---------------------------------------------------------------------------
// ablate

struct AblationVariant {
  std::string name;
  bool fusion;
  bool attention;
  bool two_branches;
};

/// Row order of the published ablation table.
inline const std::vector<AblationVariant>& ablation_variants() {
  static const std::vector<AblationVariant> v{{"fusion_only", true, false, false},
                                              {"attention_only", false, true, false},
                                              {"both_two_branch", true, true, true},
                                              {"both_one_branch", true, true, false}};
  return v;
}

struct AblationRow {
  AblationVariant variant;
  detail::ValidationResult result;
  double final_loss = 0.0;
};

inline std::vector<AblationRow> run_ablation(const TrainingConfig& base, std::ostream& log) {
  std::vector<AblationRow> rows;
  log << "ablation: seed " << base.rng_seed << ", " << base.epochs << " epochs x " << base.steps_per_epoch
      << " steps, batch " << base.batch_size << " for every variant\n";
  const std::filesystem::path root = base.output_dir;
  for (const auto& v : ablation_variants()) {
    TrainOptions opt;
    opt.config = base;
    opt.config.fusion_enabled = v.fusion;
    opt.config.attention_enabled = v.attention;
    opt.config.learnable_identity_branch = v.two_branches;
    opt.config.output_dir = (root / ("ablate_" + v.name)).string();
    if (base.corpus == "synthetic") opt.config.corpus = (root / "synthetic_train").string();
    if (base.val_corpus == "synthetic") opt.config.val_corpus = (root / "synthetic_val").string();
    std::filesystem::create_directories(root);
    if (base.corpus == "synthetic" && !std::filesystem::exists(opt.config.corpus)) {
      make_synthetic_corpus(opt.config.corpus, base.synthetic_count, base.synthetic_size, base.rng_seed);
    }
    if (base.val_corpus == "synthetic" && !std::filesystem::exists(opt.config.val_corpus)) {
      make_synthetic_corpus(opt.config.val_corpus, base.val_count, base.synthetic_size,
                            base.rng_seed + detail::kValSeedOffset, Split::Test);
    }
    log << "== " << v.name << "\n";
    std::ostringstream quiet;
    const TrainSummary s = run_training(opt, quiet);
    rows.push_back(AblationRow{v, *s.validation, s.final_loss});
    log << "   final loss " << s.final_loss << ", validation " << std::fixed << std::setprecision(3)
        << s.validation->psnr << " dB\n"
        << std::defaultfloat;
  }
  return rows;
}

inline void print_ablation_table(std::ostream& out, const std::vector<AblationRow>& rows, std::size_t scale) {
  out << std::left << std::setw(18) << "variant" << std::setw(8) << "fusion" << std::setw(11) << "attention"
      << std::setw(10) << "branches" << std::right << std::setw(11) << "PSNR dB" << std::setw(9) << "SSIM"
      << std::setw(13) << "bicubic dB" << std::setw(9) << "gain" << "\n";
  out << std::fixed;
  for (const auto& r : rows) {
    out << std::left << std::setw(18) << r.variant.name << std::setw(8) << (r.variant.fusion ? "yes" : "no")
        << std::setw(11) << (r.variant.attention ? "yes" : "no") << std::setw(10)
        << (r.variant.two_branches ? "two" : "one") << std::right << std::setprecision(3) << std::setw(11)
        << r.result.psnr << std::setprecision(4) << std::setw(9) << r.result.ssim << std::setprecision(3)
        << std::setw(13) << r.result.bicubic_psnr << std::setw(9) << r.result.psnr - r.result.bicubic_psnr
        << "\n";
  }
  out << std::defaultfloat;
  out << "\nPSNR values above are desk-scale (synthetic validation set, x" << scale << ").\n"
      << "Published full-scale reference values for the same rows (reported results, not\n"
         "reproduced here; for context only): "
         "31.62 / 31.58 / 31.66 / 31.67 dB.\n";
}

inline int cmd_ablate(const TrainingConfig& cfg, std::ostream& out) {
  validate(cfg);
  const auto rows = run_ablation(cfg, out);
  print_ablation_table(out, rows, cfg.scale);
  std::ofstream csv(std::filesystem::path(cfg.output_dir) / "ablation.csv");
  csv << "variant,fusion,attention,learnable_branches,psnr_db,ssim,bicubic_psnr_db\n" << std::setprecision(9);
  for (const auto& r : rows) {
    csv << r.variant.name << ',' << r.variant.fusion << ',' << r.variant.attention << ','
        << (r.variant.two_branches ? 2 : 1) << ',' << r.result.psnr << ',' << r.result.ssim << ','
        << r.result.bicubic_psnr << '\n';
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// make-synthetic

struct SyntheticOptions {
  std::filesystem::path out;
  std::size_t count = 16;
  std::size_t size = 128;
  std::uint64_t seed = 1;
};

inline int cmd_make_synthetic(const SyntheticOptions& opt, std::ostream& out) {
  if (opt.count == 0 || opt.size == 0) throw ConfigError("count and size must be positive");
  const CorpusManifest m = make_synthetic_corpus(opt.out, opt.count, opt.size, opt.seed);
  std::ofstream mf(opt.out / "manifest.txt");
  write_manifest(mf, m);
  out << "wrote " << m.entries.size() << " images to " << opt.out.string() << "\n";
  return kExitOk;
}

}  // namespace srru
