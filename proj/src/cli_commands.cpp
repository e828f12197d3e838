#include "edgestereo/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "edgestereo/codecs.hpp"
#include "edgestereo/grad_check.hpp"

namespace edgestereo {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {
// distinct sub-streams of the run seed
constexpr std::uint64_t kTrainStream = 0xDA7A;
constexpr std::uint64_t kHoldoutStream = 0xE0E0;

Tensor take_batch0(const Tensor& t) {
  check(t.rank() == 4 && t.dim(0) == 1, "expected a single-sample batch");
  Tensor out({t.dim(1), t.dim(2), t.dim(3)}, t.dtype());
  for (std::int64_t i = 0; i < out.numel(); ++i) out.set(i, t.get(i));
  return out;
}

Tensor unsqueeze(const Tensor& t) {
  check(t.rank() == 3, "expected a [C,H,W] tensor");
  Tensor out({1, t.dim(0), t.dim(1), t.dim(2)}, t.dtype());
  for (std::int64_t i = 0; i < t.numel(); ++i) out.set(i, t.get(i));
  return out;
}

std::string sample_stem(std::int64_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "sample_%04lld", static_cast<long long>(i));
  return buf;
}
}  // namespace

RunConfig RunConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(std::string("config: bad JSON: ") + e.what());
  }
  RunConfig cfg;
  cfg.seed = j.value("seed", cfg.seed);
  cfg.out_dir = j.value("out", cfg.out_dir);
  if (j.contains("model")) cfg.model = ModelConfig::from_json(j["model"].dump());
  if (j.contains("data")) {
    const auto& d = j["data"];
    cfg.data.kind = d.value("kind", cfg.data.kind);
    check(cfg.data.kind == "generator" || cfg.data.kind == "manifest",
          "config: data.kind must be 'generator' or 'manifest'");
    cfg.data.count = d.value("count", cfg.data.count);
    cfg.data.holdout = d.value("holdout", cfg.data.holdout);
    cfg.data.manifest = d.value("manifest", cfg.data.manifest);
    cfg.data.generator.height = d.value("height", cfg.data.generator.height);
    cfg.data.generator.width = d.value("width", cfg.data.generator.width);
    cfg.data.generator.max_disparity = d.value("max_disparity", cfg.data.generator.max_disparity);
    cfg.data.generator.layers = d.value("layers", cfg.data.generator.layers);
    cfg.data.generator.texture_smoothing =
        d.value("texture_smoothing", cfg.data.generator.texture_smoothing);
    cfg.data.generator.subpixel = d.value("subpixel", cfg.data.generator.subpixel);
  }
  if (j.contains("training")) {
    const auto& t = j["training"];
    cfg.batch_size = t.value("batch_size", cfg.batch_size);
    cfg.checkpoint_every = t.value("checkpoint_every", cfg.checkpoint_every);
    if (t.contains("phases")) {
      for (const auto& p : t["phases"]) {
        PhaseConfig pc;
        pc.id = p.value("id", pc.id);
        pc.iterations = p.value("iterations", pc.iterations);
        pc.lr = p.value("lr", pc.lr);
        pc.decay_steps = p.value("decay_steps", pc.decay_steps);
        pc.decay_factor = p.value("decay_factor", pc.decay_factor);
        pc.lambda_ds = p.value("lambda_ds", pc.lambda_ds);
        cfg.phases.push_back(std::move(pc));
      }
    }
  }
  return cfg;
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  check(in.good(), "config: cannot open '" + path + "'");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return from_json(text);
}

EvalReport evaluate_model(const EdgeStereoModel& model, const DataSource& data,
                          const std::vector<double>& thresholds) {
  NoGradGuard ng;
  EvalReport agg;
  for (double t : thresholds) agg.bad[t] = 0.0;
  double epe_weighted = 0.0;
  for (std::int64_t i = 0; i < data.size(); ++i) {
    StereoSample s = data.sample(i);
    auto left = Node::leaf(unsqueeze(s.left).astype(model.dtype()));
    auto right = Node::leaf(unsqueeze(s.right).astype(model.dtype()));
    auto out = model.forward(left, right);
    EvalReport rep = evaluate(take_batch0(out.maps.back().map->value).astype(DType::F64),
                              s.gt_disparity.astype(DType::F64),
                              s.valid_mask.astype(DType::F64), thresholds);
    epe_weighted += rep.epe * static_cast<double>(rep.valid_count);
    for (double t : thresholds) agg.bad[t] += rep.bad[t] * static_cast<double>(rep.valid_count);
    agg.valid_count += rep.valid_count;
  }
  check(agg.valid_count > 0, "evaluate_model: no valid pixels in the dataset");
  agg.epe = epe_weighted / static_cast<double>(agg.valid_count);
  for (double t : thresholds) agg.bad[t] /= static_cast<double>(agg.valid_count);
  return agg;
}

std::string format_eval_report(const EvalReport& rep) {
  std::string out;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "epe: %.6f\n", rep.epe);
  out += buf;
  for (const auto& [t, frac] : rep.bad) {
    std::snprintf(buf, sizeof(buf), "bad_%g: %.6f\n", t, frac);
    out += buf;
  }
  std::snprintf(buf, sizeof(buf), "valid_count: %lld\n", static_cast<long long>(rep.valid_count));
  out += buf;
  return out;
}

int cmd_gen_data(const RunConfig& cfg) {
  check(cfg.data.kind == "generator", "gen-data: config data.kind must be 'generator'");
  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  check(!ec && fs::is_directory(cfg.out_dir), "gen-data: cannot create output dir '" + cfg.out_dir + "'");
  {
    std::ofstream probe(cfg.out_dir + "/.write_probe");
    check(probe.good(), "gen-data: output dir '" + cfg.out_dir + "' is not writable");
  }
  fs::remove(cfg.out_dir + "/.write_probe", ec);

  GeneratorSource source(cfg.data.generator, mix_seed(cfg.seed, kTrainStream), cfg.data.count);
  std::vector<ManifestEntry> entries;
  for (std::int64_t i = 0; i < cfg.data.count; ++i) {
    StereoSample s = source.sample(i);
    const std::string stem = sample_stem(i);
    ManifestEntry e{stem + "_left.png", stem + "_right.png", stem + "_disp.pfm",
                    stem + "_mask.png", stem + "_edges.png"};
    png_write_rgb8(cfg.out_dir + "/" + e.left, s.left);
    png_write_rgb8(cfg.out_dir + "/" + e.right, s.right);
    pfm_write(cfg.out_dir + "/" + e.disparity, s.gt_disparity);
    png_write_gray8(cfg.out_dir + "/" + e.mask, s.valid_mask);
    png_write_gray8(cfg.out_dir + "/" + e.edges, s.gt_edges);
    entries.push_back(std::move(e));
  }
  manifest_write(cfg.out_dir + "/manifest.txt", entries);
  std::printf("wrote %lld samples to %s\n", static_cast<long long>(cfg.data.count),
              cfg.out_dir.c_str());
  return 0;
}

int cmd_train(const RunConfig& cfg, const std::string& resume_path) {
  check(!cfg.phases.empty(), "train: config lists no phases");
  EdgeStereoModel model(cfg.model, cfg.seed);

  std::unique_ptr<DataSource> source;
  if (cfg.data.kind == "manifest")
    source = std::make_unique<ManifestSource>(cfg.data.manifest);
  else
    source = std::make_unique<GeneratorSource>(cfg.data.generator, mix_seed(cfg.seed, kTrainStream),
                                               cfg.data.count);

  std::unique_ptr<DataSource> holdout;
  if (cfg.data.kind == "generator" && cfg.data.holdout > 0)
    holdout = std::make_unique<GeneratorSource>(cfg.data.generator,
                                                mix_seed(cfg.seed, kHoldoutStream),
                                                cfg.data.holdout);

  std::vector<PhaseSpec> plan;
  for (const auto& p : cfg.phases) {
    LrSchedule lr{p.lr, p.decay_steps, p.decay_factor};
    plan.push_back(make_phase_spec(p.id, p.iterations, lr, p.lambda_ds, cfg.model.use_edge_cues));
  }

  int start_phase = 0;
  std::int64_t start_iter = 0;
  CheckpointData resume_data;
  const CheckpointData* resume = nullptr;
  if (!resume_path.empty()) {
    resume_data = checkpoint_read(resume_path);
    check(resume_data.model_config_json == model.config().to_json(),
          "train: checkpoint model config does not match the run config");
    restore_model(resume_data, model);
    start_phase = std::max(0, resume_data.phase_index);
    start_iter = resume_data.iteration;
    while (start_phase < static_cast<int>(plan.size()) &&
           start_iter >= plan[static_cast<std::size_t>(start_phase)].iterations) {
      ++start_phase;
      start_iter = 0;
    }
    resume = &resume_data;
    if (start_phase >= static_cast<int>(plan.size())) {
      std::printf("checkpoint is already past the configured schedule; nothing to do\n");
      return 0;
    }
  }

  if (holdout) {
    EvalReport rep = evaluate_model(model, *holdout);
    std::printf("held-out before training:\n%s", format_eval_report(rep).c_str());
  }

  TrainOptions opts;
  opts.batch_size = cfg.batch_size;
  opts.out_dir = cfg.out_dir;
  opts.checkpoint_every = cfg.checkpoint_every;
  Trainer trainer(model, plan, *source, cfg.seed, opts);
  auto trace = trainer.run(start_phase, start_iter, resume);

  fs::create_directories(cfg.out_dir);
  {
    std::ofstream log(cfg.out_dir + "/loss_log.txt", resume ? std::ios::app : std::ios::out);
    for (const auto& r : trace) {
      char buf[128];
      std::snprintf(buf, sizeof(buf), "phase %d iter %lld loss %.9g lr %.9g\n", r.phase_id,
                    static_cast<long long>(r.iteration), r.loss, r.lr);
      log << buf;
    }
  }

  if (holdout) {
    EvalReport rep = evaluate_model(model, *holdout);
    const std::string text = format_eval_report(rep);
    std::printf("held-out after training:\n%s", text.c_str());
    std::ofstream out(cfg.out_dir + "/eval.txt");
    out << text;
  }
  std::printf("checkpoints in %s\n", cfg.out_dir.c_str());
  return 0;
}

int cmd_infer(const std::string& checkpoint_path, const std::string& left_png,
              const std::string& right_png, const std::string& out_dir,
              const std::string& gt_pfm) {
  CheckpointData data = checkpoint_read(checkpoint_path);
  ModelConfig mc = ModelConfig::from_json(data.model_config_json);
  EdgeStereoModel model(mc, 0);
  restore_model(data, model);

  Tensor left = png_read_rgb8(left_png);
  Tensor right = png_read_rgb8(right_png);
  check(left.shape() == right.shape(), "infer: left/right image extents differ");

  NoGradGuard ng;
  auto out = model.forward(Node::leaf(unsqueeze(left)), Node::leaf(unsqueeze(right)));
  Tensor disparity = take_batch0(out.maps.back().map->value);

  fs::create_directories(out_dir);
  pfm_write(out_dir + "/disparity.pfm", disparity);
  if (mc.use_edge_cues) png_write_gray8(out_dir + "/edges.png", take_batch0(out.edge.edge_map->value));

  if (!gt_pfm.empty()) {
    Tensor gt = pfm_read(gt_pfm);
    check(gt.same_shape(disparity), "infer: ground truth extents do not match the prediction");
    const int H = gt.dim(1), W = gt.dim(2);
    // linear ramp to orange, saturating at 3 px
    Tensor err_img({3, H, W}, DType::F32);
    for (std::int64_t i = 0; i < gt.numel(); ++i) {
      const double t = std::min(std::fabs(disparity.get(i) - gt.get(i)) / 3.0, 1.0);
      err_img.set(i, t);
      err_img.set(gt.numel() + i, t * 165.0 / 255.0);
    }
    png_write_rgb8(out_dir + "/error.png", err_img);
    EvalReport rep =
        evaluate(disparity.astype(DType::F64), gt.astype(DType::F64),
                 Tensor::full(gt.shape(), 1.0, DType::F64), {1.0, 3.0, 5.0});
    std::printf("%s", format_eval_report(rep).c_str());
  }
  std::printf("wrote %s/disparity.pfm\n", out_dir.c_str());
  return 0;
}

int cmd_eval(const std::string& pred_dir, const std::string& gt_dir,
             const std::vector<double>& thresholds) {
  std::vector<std::string> names;
  check(fs::is_directory(pred_dir), "eval: '" + pred_dir + "' is not a directory");
  check(fs::is_directory(gt_dir), "eval: '" + gt_dir + "' is not a directory");
  for (const auto& e : fs::directory_iterator(pred_dir))
    if (e.path().extension() == ".pfm") names.push_back(e.path().filename().string());
  std::sort(names.begin(), names.end());
  check(!names.empty(), "eval: no .pfm predictions in '" + pred_dir + "'");

  EvalReport agg;
  for (double t : thresholds) agg.bad[t] = 0.0;
  double epe_weighted = 0.0;
  for (const auto& name : names) {
    Tensor pred = pfm_read(pred_dir + "/" + name);
    const std::string gt_path = gt_dir + "/" + name;
    check(fs::exists(gt_path), "eval: missing ground truth '" + gt_path + "'");
    Tensor gt = pfm_read(gt_path);

    Tensor mask = Tensor::full(gt.shape(), 1.0, DType::F32);
    std::string mask_name = name;
    const std::string suffix = "_disp.pfm";
    if (mask_name.size() > suffix.size() &&
        mask_name.compare(mask_name.size() - suffix.size(), suffix.size(), suffix) == 0) {
      mask_name = mask_name.substr(0, mask_name.size() - suffix.size()) + "_mask.png";
      if (fs::exists(gt_dir + "/" + mask_name)) {
        mask = png_read_gray8(gt_dir + "/" + mask_name);
        for (std::int64_t i = 0; i < mask.numel(); ++i) mask.set(i, mask.get(i) > 0.5 ? 1.0 : 0.0);
      }
    }
    EvalReport rep = evaluate(pred.astype(DType::F64), gt.astype(DType::F64),
                              mask.astype(DType::F64), thresholds);
    epe_weighted += rep.epe * static_cast<double>(rep.valid_count);
    for (double t : thresholds) agg.bad[t] += rep.bad[t] * static_cast<double>(rep.valid_count);
    agg.valid_count += rep.valid_count;
  }
  agg.epe = epe_weighted / static_cast<double>(agg.valid_count);
  for (double t : thresholds) agg.bad[t] /= static_cast<double>(agg.valid_count);
  std::printf("samples: %zu\n%s", names.size(), format_eval_report(agg).c_str());
  return 0;
}

int cmd_gradcheck() {
  auto results = grad_check_suite();
  bool all_pass = true;
  std::string first_failure;
  std::printf("%-24s %-12s %s\n", "operator", "max_rel_err", "status");
  for (const auto& r : results) {
    const bool pass = r.max_rel_error < kGradCheckTolerance;
    std::printf("%-24s %-12.3e %s\n", r.name.c_str(), r.max_rel_error, pass ? "PASS" : "FAIL");
    if (!pass && first_failure.empty()) first_failure = r.name;
    all_pass = all_pass && pass;
  }
  if (!all_pass) {
    std::printf("FAILED: operator '%s' exceeds tolerance %.0e\n", first_failure.c_str(),
                kGradCheckTolerance);
    return 1;
  }
  std::printf("all %zu operators pass under %.0e\n", results.size(), kGradCheckTolerance);
  return 0;
}

}  // namespace edgestereo
