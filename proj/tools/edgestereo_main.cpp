#include <CLI11.hpp>
#include <cstdio>

#include "edgestereo/cli.hpp"

using namespace edgestereo;

int main(int argc, char** argv) {
  CLI::App app{
      "EdgeStereo: multi-task stereo matching with context and residual pyramids.\n"
      "Set EDGESTEREO_THREADS to cap internal kernel parallelism."};
  app.require_subcommand(1);

  std::string config_path, out_dir, resume_path;
  std::uint64_t seed = 0;
  bool seed_set = false, out_set = false;

  const auto load_config = [&]() {
    RunConfig cfg = config_path.empty() ? RunConfig{} : RunConfig::from_file(config_path);
    if (seed_set) cfg.seed = seed;
    if (out_set) cfg.out_dir = out_dir;
    return cfg;
  };

  auto add_common = [&](CLI::App* cmd, bool config_required) {
    auto* opt = cmd->add_option("--config", config_path, "JSON run configuration");
    if (config_required) opt->required()->check(CLI::ExistingFile);
    cmd->add_option("--seed", seed, "override the config seed")->each([&](const std::string&) {
      seed_set = true;
    });
    cmd->add_option("--out", out_dir, "override the output directory")->each([&](const std::string&) {
      out_set = true;
    });
  };

  auto* gen = app.add_subcommand("gen-data", "generate a synthetic stereo dataset");
  add_common(gen, true);
  std::int64_t count_override = -1;
  gen->add_option("--count", count_override, "override the sample count");

  auto* train = app.add_subcommand("train", "run the multi-phase training schedule");
  add_common(train, true);
  train->add_option("--resume", resume_path, "checkpoint to resume from")->check(CLI::ExistingFile);

  auto* infer = app.add_subcommand("infer", "predict disparity and edges for one pair");
  std::string ckpt, left, right, gt, infer_out = "infer_out";
  infer->add_option("--checkpoint", ckpt, "trained checkpoint")->required()->check(CLI::ExistingFile);
  infer->add_option("--left", left, "left image (8-bit RGB PNG)")->required()->check(CLI::ExistingFile);
  infer->add_option("--right", right, "right image (8-bit RGB PNG)")->required()->check(CLI::ExistingFile);
  infer->add_option("--gt", gt, "optional ground-truth disparity PFM")->check(CLI::ExistingFile);
  infer->add_option("--out", infer_out, "output directory");

  auto* eval = app.add_subcommand("eval", "compare predicted and ground-truth disparity dirs");
  std::string pred_dir, gt_dir;
  std::vector<double> thresholds{1.0, 3.0, 5.0};
  eval->add_option("--pred", pred_dir, "directory of predicted .pfm maps")->required();
  eval->add_option("--gt", gt_dir, "directory of ground-truth .pfm maps")->required();
  eval->add_option("--thresholds", thresholds, "bad-pixel thresholds in pixels");

  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of every operator");
  (void)gradcheck;

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      RunConfig cfg = load_config();
      if (count_override >= 0) cfg.data.count = count_override;
      return cmd_gen_data(cfg);
    }
    if (train->parsed()) return cmd_train(load_config(), resume_path);
    if (infer->parsed()) return cmd_infer(ckpt, left, right, infer_out, gt);
    if (eval->parsed()) return cmd_eval(pred_dir, gt_dir, thresholds);
    if (gradcheck->parsed()) return cmd_gradcheck();
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
