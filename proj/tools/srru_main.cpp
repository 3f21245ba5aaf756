#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "srru/commands.hpp"

namespace {

struct ConfigFlags {
  std::string config_path;
  std::string preset = "full";
  std::vector<std::string> overrides;

  void add_to(CLI::App* cmd, bool with_preset = true) {
    cmd->add_option("--config", config_path, "key = value config file")->default_str("none");
    if (with_preset) {
      cmd->add_option("--preset", preset, "base values before the config file")
          ->check(CLI::IsMember({"full", "desk"}));
    }
    cmd->add_option("--override", overrides, "key=value, applied last (repeatable)")
        ->allow_extra_args(false)
        ->default_str("none");
    cmd->footer([] {
      std::ostringstream os;
      os << "Config keys with full-scale defaults (the desk preset differs, see configs/desk.conf):\n"
         << srru::config_to_text(srru::TrainingConfig{});
      return os.str();
    }());
  }

  [[nodiscard]] srru::TrainingConfig build() const {
    srru::TrainingConfig cfg = preset == "desk" ? srru::desk_preset() : srru::TrainingConfig{};
    if (!config_path.empty()) cfg = srru::load_config_file(config_path, cfg);
    for (const auto& o : overrides) srru::apply_override(cfg, o);
    return cfg;
  }
};

/// Swallows output for --quiet.
class NullBuffer : public std::streambuf {
 protected:
  int overflow(int c) override { return c; }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"srru: recursive-unit super-resolution (train, evaluate, run)"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "help for every subcommand");
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "suppress progress output [off]");

  // train
  auto* train = app.add_subcommand("train", "train a model; writes checkpoints and train_log.csv");
  ConfigFlags train_cfg;
  train_cfg.add_to(train);
  std::string resume;
  bool no_validate = false;
  train->add_option("--resume", resume, "continue from this checkpoint (overrides apply on top)")
      ->default_str("none");
  train->add_flag("--no-validate", no_validate, "skip held-out validation after training [off]");

  // eval
  auto* eval = app.add_subcommand("eval", "PSNR/SSIM on the Y channel against the bicubic baseline");
  srru::EvalOptions eval_opt;
  std::string eval_ckpt, eval_corpus, eval_csv;
  eval->add_option("--ckpt", eval_ckpt, "checkpoint file (required unless --bicubic-only)")->default_str("none");
  eval->add_option("--corpus", eval_corpus, "directory of HR test images")->required();
  eval->add_option("--scale", eval_opt.scale, "upscaling factor")->check(CLI::IsMember({2, 4}));
  eval->add_flag("--bicubic-only", eval_opt.bicubic_only, "evaluate plain bicubic upscaling [off]");
  eval->add_option("--csv", eval_csv, "write per-image and mean rows here; model runs also get <name>_bicubic.csv")
      ->default_str("none");

  // infer
  auto* infer = app.add_subcommand("infer", "super-resolve one image to PNG");
  srru::InferOptions infer_opt;
  std::string infer_ckpt, infer_in, infer_out;
  infer->add_option("--ckpt", infer_ckpt, "checkpoint file")->required();
  infer->add_option("--in", infer_in, "input image (PNG or BMP)")->required();
  infer->add_option("--out", infer_out, "output PNG")->required();

  // gradcheck
  auto* grad = app.add_subcommand("gradcheck", "finite-difference gradient check of a tiny network");
  std::string grad_config;
  srru::GradcheckConfig grad_opt;
  grad->add_option("--config", grad_config, "config file for the architecture (channels <= 8, n_units <= 2)")
      ->default_str("none: C=8, n=2, x2");
  grad->add_option("--corrupt-layer", grad_opt.corrupt_layer, "deliberately break this layer's backward")
      ->default_str("none");
  grad->add_option("--tolerance", grad_opt.tolerance, "max relative error");
  grad->add_option("--step", grad_opt.step, "central-difference step");
  grad->add_option("--size", grad_opt.height, "input height and width (<= 8)");
  grad->add_option("--seed", grad_opt.seed, "parameter and input seed");

  // ablate
  auto* ablate = app.add_subcommand("ablate", "train the four fusion/attention/branch variants");
  ConfigFlags ablate_cfg;
  ablate_cfg.preset = "desk";
  ablate_cfg.add_to(ablate);

  // make-synthetic
  auto* synth = app.add_subcommand("make-synthetic", "write a procedural PNG corpus");
  srru::SyntheticOptions synth_opt;
  std::string synth_out;
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--count", synth_opt.count, "number of images");
  synth->add_option("--size", synth_opt.size, "image side length");
  synth->add_option("--seed", synth_opt.seed, "generator seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : srru::kExitUsage;
  }

  NullBuffer null_buf;
  std::ostream null_out(&null_buf);
  std::ostream& out = quiet ? null_out : std::cout;

  return srru::run_guarded(std::cerr, [&]() -> int {
    if (*train) {
      srru::TrainOptions opt;
      opt.validate = !no_validate;
      if (!resume.empty()) {
        opt.resume = resume;
        opt.overrides = train_cfg.overrides;
      } else {
        opt.config = train_cfg.build();
      }
      return srru::cmd_train(opt, out);
    }
    if (*eval) {
      if (!eval_ckpt.empty()) eval_opt.checkpoint = eval_ckpt;
      eval_opt.corpus = eval_corpus;
      if (!eval_csv.empty()) eval_opt.csv = eval_csv;
      return srru::cmd_eval(eval_opt, std::cout);
    }
    if (*infer) {
      infer_opt.checkpoint = infer_ckpt;
      infer_opt.input = infer_in;
      infer_opt.output = infer_out;
      return srru::cmd_infer(infer_opt, out);
    }
    if (*grad) {
      if (!grad_config.empty()) {
        const auto cfg = srru::load_config_file(grad_config);
        const auto from_file = srru::gradcheck_config_from(cfg);
        grad_opt.arch = from_file.arch;
        grad_opt.charbonnier_eps = from_file.charbonnier_eps;
      }
      grad_opt.width = grad_opt.height;
      return srru::cmd_gradcheck(grad_opt, std::cout);
    }
    if (*ablate) return srru::cmd_ablate(ablate_cfg.build(), std::cout);
    if (*synth) {
      synth_opt.out = synth_out;
      return srru::cmd_make_synthetic(synth_opt, out);
    }
    return srru::kExitUsage;
  });
}
