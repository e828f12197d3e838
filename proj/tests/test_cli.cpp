#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "edgestereo/cli.hpp"
#include "edgestereo/codecs.hpp"

using namespace edgestereo;
namespace fs = std::filesystem;

namespace {

std::string temp_dir(const char* tag) {
  auto p = fs::temp_directory_path() / (std::string("edgestereo_cli_") + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p.string();
}

std::string file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

RunConfig tiny_run(const std::string& out) {
  RunConfig cfg = RunConfig::from_json(R"({
    "seed": 11,
    "model": {
      "backbone_widths": [4, 6, 8, 10, 12],
      "shared_stages": 3,
      "side_channels": 2,
      "fm_channels": 12,
      "branch_channels": 3,
      "context_pyramid": "P-1_2_4_8",
      "scales": 3,
      "max_disp": 2,
      "est_hidden": 6,
      "encoder_base": 8,
      "encoder_max": 16
    },
    "data": { "kind": "generator", "count": 4, "holdout": 2,
              "height": 16, "width": 32, "max_disparity": 3, "layers": 2 },
    "training": { "batch_size": 2, "phases": [
      { "id": 1, "iterations": 2, "lr": 1e-3 },
      { "id": 2, "iterations": 2, "lr": 1e-3, "lambda_ds": 0.1 },
      { "id": 3, "iterations": 2, "lr": 1e-3 }
    ]}
  })");
  cfg.out_dir = out;
  return cfg;
}

}  // namespace

TEST_CASE("config parsing applies defaults and validates") {
  RunConfig cfg = RunConfig::from_json("{}");
  CHECK(cfg.seed == 7);
  CHECK(cfg.model.scales == 7);
  CHECK(cfg.model.max_disp == 40);
  CHECK(cfg.model.context_pyramid == "P-2_4_8_16");
  CHECK_THROWS_AS((void)RunConfig::from_json("{ nope"), Error);
  CHECK_THROWS_AS((void)RunConfig::from_json(R"({"model": {"context_pyramid": "Q-1"}})"), Error);
  CHECK_THROWS_AS((void)RunConfig::from_json(R"({"data": {"kind": "webcam"}})"), Error);
}

TEST_CASE("gen-data writes samples, a manifest, and is rerun-identical") {
  const std::string out = temp_dir("gen");
  RunConfig cfg = tiny_run(out);
  REQUIRE(cmd_gen_data(cfg) == 0);
  auto entries = manifest_read(out + "/manifest.txt");
  REQUIRE(entries.size() == 4);
  for (const auto& e : entries)
    for (const std::string& f : {e.left, e.right, e.disparity, e.mask, e.edges})
      CHECK(fs::exists(out + "/" + f));

  // collect bytes, rerun, compare hashes
  std::vector<std::string> before;
  for (const auto& e : entries) before.push_back(file_bytes(out + "/" + e.disparity));
  REQUIRE(cmd_gen_data(cfg) == 0);
  for (std::size_t i = 0; i < entries.size(); ++i)
    CHECK(file_bytes(out + "/" + entries[i].disparity) == before[i]);
}

TEST_CASE("gen-data fails cleanly on an unwritable output") {
  RunConfig cfg = tiny_run("/dev/null/nested");
  CHECK_THROWS_AS((void)cmd_gen_data(cfg), Error);
}

TEST_CASE("train, infer, and eval round trip on a tiny run") {
  const std::string root = temp_dir("pipeline");
  RunConfig cfg = tiny_run(root + "/run");
  REQUIRE(cmd_train(cfg) == 0);
  CHECK(fs::exists(cfg.out_dir + "/final.ckpt"));
  CHECK(fs::exists(cfg.out_dir + "/phase3.ckpt"));
  CHECK(fs::exists(cfg.out_dir + "/loss_log.txt"));
  CHECK(fs::exists(cfg.out_dir + "/eval.txt"));

  // training wrote one loss line per iteration
  std::ifstream log(cfg.out_dir + "/loss_log.txt");
  int lines = 0;
  std::string line;
  while (std::getline(log, line)) ++lines;
  CHECK(lines == 6);

  // produce one sample on disk for infer
  RunConfig gen_cfg = tiny_run(root + "/data");
  gen_cfg.data.count = 2;
  REQUIRE(cmd_gen_data(gen_cfg) == 0);

  const std::string infer_out = root + "/infer";
  REQUIRE(cmd_infer(cfg.out_dir + "/final.ckpt", root + "/data/sample_0000_left.png",
                    root + "/data/sample_0000_right.png", infer_out,
                    root + "/data/sample_0000_disp.pfm") == 0);
  CHECK(fs::exists(infer_out + "/disparity.pfm"));
  CHECK(fs::exists(infer_out + "/edges.png"));
  CHECK(fs::exists(infer_out + "/error.png"));

  // full-size contract of the final disparity map
  Tensor pred = pfm_read(infer_out + "/disparity.pfm");
  CHECK(pred.shape() == std::vector<int>{1, 16, 32});

  // eval with pred == gt reports zero error (exit 0)
  const std::string pred_dir = root + "/pred";
  fs::create_directories(pred_dir);
  fs::copy_file(root + "/data/sample_0000_disp.pfm", pred_dir + "/sample_0000_disp.pfm");
  fs::copy_file(root + "/data/sample_0001_disp.pfm", pred_dir + "/sample_0001_disp.pfm");
  CHECK(cmd_eval(pred_dir, root + "/data") == 0);

  // checkpoint/architecture mismatch is a hard error
  RunConfig other = tiny_run(root + "/run2");
  other.model.fm_channels = 16;
  CHECK_THROWS_AS((void)cmd_train(other, cfg.out_dir + "/final.ckpt"), Error);
}

TEST_CASE("eval validates its inputs") {
  const std::string dir = temp_dir("evalbad");
  CHECK_THROWS_AS((void)cmd_eval(dir + "/missing", dir), Error);
  fs::create_directories(dir + "/empty");
  CHECK_THROWS_AS((void)cmd_eval(dir + "/empty", dir + "/empty"), Error);
}

TEST_CASE("gradcheck command passes on this build") { CHECK(cmd_gradcheck() == 0); }
