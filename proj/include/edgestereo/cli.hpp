#pragma once

#include <optional>
#include <string>
#include <vector>

#include "edgestereo/trainer.hpp"

namespace edgestereo {

struct DataConfig {
  std::string kind = "generator";  // "generator" | "manifest"
  GeneratorParams generator;
  std::int64_t count = 64;
  std::int64_t holdout = 16;  // extra generated samples for held-out evaluation
  std::string manifest;
};

struct PhaseConfig {
  int id = 2;
  std::int64_t iterations = 0;
  double lr = 1e-4;
  std::vector<std::int64_t> decay_steps;
  double decay_factor = 0.5;
  double lambda_ds = 0.1;
};

struct RunConfig {
  std::uint64_t seed = 7;
  std::string out_dir = "out";
  ModelConfig model;
  DataConfig data;
  int batch_size = 2;
  std::int64_t checkpoint_every = 0;
  std::vector<PhaseConfig> phases;

  static RunConfig from_json(const std::string& text);
  static RunConfig from_file(const std::string& path);
};

// Pixel-weighted aggregate of the per-sample reports.
EvalReport evaluate_model(const EdgeStereoModel& model, const DataSource& data,
                          const std::vector<double>& thresholds = {1.0, 3.0, 5.0});

std::string format_eval_report(const EvalReport& rep);

// Subcommand entry points; print to stdout and return a process exit code.
int cmd_gen_data(const RunConfig& cfg);
int cmd_train(const RunConfig& cfg, const std::string& resume_path = "");
int cmd_infer(const std::string& checkpoint_path, const std::string& left_png,
              const std::string& right_png, const std::string& out_dir,
              const std::string& gt_pfm = "");
int cmd_eval(const std::string& pred_dir, const std::string& gt_dir,
             const std::vector<double>& thresholds = {1.0, 3.0, 5.0});
int cmd_gradcheck();

}  // namespace edgestereo
