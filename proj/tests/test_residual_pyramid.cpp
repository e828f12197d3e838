#include <cmath>

#include "doctest.h"
#include "edgestereo/grad_check.hpp"
#include "edgestereo/model.hpp"
#include "test_util.hpp"

using namespace edgestereo;
using namespace edgestereo::testing;
namespace o = edgestereo::ops;

namespace {

ModelConfig toy_config(int scales) {
  ModelConfig cfg;
  cfg.backbone_widths = {6, 8, 10, 12, 14};
  cfg.shared_stages = 3;
  cfg.side_channels = 4;
  cfg.fm_channels = 16;
  cfg.context_pyramid = "P-1_2_4_8";
  cfg.scales = scales;
  cfg.max_disp = 3;
  cfg.est_hidden = 8;
  cfg.encoder_base = 12;
  cfg.encoder_max = 24;
  return cfg;
}

ResidualPyramidConfig standalone_config(int scales, int edge_channels) {
  ResidualPyramidConfig rp;
  rp.scales = scales;
  rp.prior_scale = 2;
  rp.prior_channels = 10;
  rp.skip_channels = {4, 6};
  rp.edge_channels = edge_channels;
  rp.image_channels = 3;
  rp.encoder_base = 8;
  rp.encoder_max = 16;
  rp.est_hidden = 6;
  return rp;
}

struct StandaloneInputs {
  NodePtr prior, left, right, edge_feat, edge_map;
  std::vector<NodePtr> skips;
};

StandaloneInputs make_inputs(Rng& rng, int H, int W, int edge_channels, DType dt = DType::F64,
                             bool prior_grad = false) {
  StandaloneInputs in;
  in.prior = Node::leaf(rand_tensor({1, 10, H / 4, W / 4}, rng, -1, 1, dt), prior_grad);
  in.skips = {Node::leaf(rand_tensor({1, 4, H, W}, rng, -1, 1, dt)),
              Node::leaf(rand_tensor({1, 6, H / 2, W / 2}, rng, -1, 1, dt))};
  in.left = Node::leaf(rand_tensor({1, 3, H, W}, rng, 0, 1, dt));
  in.right = Node::leaf(rand_tensor({1, 3, H, W}, rng, 0, 1, dt));
  if (edge_channels > 0) {
    in.edge_feat = Node::leaf(rand_tensor({1, edge_channels, H, W}, rng, -1, 1, dt));
    in.edge_map = Node::leaf(rand_tensor({1, 1, H, W}, rng, 0, 1, dt));
  }
  return in;
}

}  // namespace

TEST_CASE("estimation block: zero weights give a zero map, extents preserved") {
  ParamStore store;
  Rng rng(100);
  EstimationBlock blk(store, "est", 9, 6, DType::F64, rng);
  for (const auto& p : store.params()) p.node->value.fill(0.0);
  auto agg = Node::leaf(rand_tensor({2, 9, 5, 7}, rng));
  auto out = blk.forward(agg);
  CHECK(out->value.shape() == std::vector<int>{2, 1, 5, 7});
  for (std::int64_t i = 0; i < out->value.numel(); ++i) CHECK(out->value.get(i) == 0.0);
}

TEST_CASE("estimation block: gradient reaches all four layers") {
  ParamStore store;
  Rng rng(101);
  EstimationBlock blk(store, "est", 5, 6, DType::F64, rng);
  auto agg = Node::leaf(rand_tensor({1, 5, 4, 4}, rng), true);
  backward(o::reduce_mean(blk.forward(agg)));
  int weights_with_grad = 0;
  for (const auto& p : store.params()) {
    REQUIRE(p.node->has_grad());
    double mag = 0.0;
    for (std::int64_t i = 0; i < p.node->grad.numel(); ++i) mag += std::fabs(p.node->grad.get(i));
    if (p.name.find(".weight") != std::string::npos && mag > 0.0) ++weights_with_grad;
  }
  CHECK(weights_with_grad == 4);
  CHECK(agg->has_grad());
}

TEST_CASE("decode emits S maps with exact x2 resolution chaining") {
  ParamStore store;
  Rng rng(102);
  ResidualPyramid rp(store, "res", standalone_config(4, 0), DType::F64, rng);
  auto in = make_inputs(rng, 16, 24, 0);
  auto res = rp.decode(in.prior, in.skips, nullptr, nullptr, in.left, in.right);
  REQUIRE(res.maps.size() == 4);
  CHECK(res.maps[0].scale == 3);
  CHECK(res.maps.back().scale == 0);
  for (std::size_t i = 0; i < res.maps.size(); ++i) {
    const auto& v = res.maps[i].map->value;
    CHECK(v.dim(1) == 1);
    CHECK(v.dim(2) == 16 >> res.maps[i].scale);
    CHECK(v.dim(3) == 24 >> res.maps[i].scale);
    if (i > 0) {
      CHECK(v.dim(2) == 2 * res.maps[i - 1].map->value.dim(2));
      CHECK(v.dim(3) == 2 * res.maps[i - 1].map->value.dim(3));
    }
  }
}

TEST_CASE("toy S=3 decode on 32x64 yields 8x16, 16x32, 32x64") {
  auto cfg = toy_config(3);
  EdgeStereoModel model(cfg, 55, DType::F32);
  Rng rng(103);
  auto left = Node::leaf(rand_tensor({1, 3, 32, 64}, rng, 0, 1, DType::F32));
  auto right = Node::leaf(rand_tensor({1, 3, 32, 64}, rng, 0, 1, DType::F32));
  auto out = model.forward(left, right);
  REQUIRE(out.maps.size() == 3);
  CHECK(out.maps[0].map->value.dim(2) == 8);
  CHECK(out.maps[0].map->value.dim(3) == 16);
  CHECK(out.maps[1].map->value.dim(2) == 16);
  CHECK(out.maps[1].map->value.dim(3) == 32);
  CHECK(out.maps[2].map->value.dim(2) == 32);
  CHECK(out.maps[2].map->value.dim(3) == 64);
}

TEST_CASE("zero-weighted estimation blocks give all-zero maps") {
  ParamStore store;
  Rng rng(104);
  ResidualPyramid rp(store, "res", standalone_config(4, 3), DType::F64, rng);
  for (const auto& p : store.params())
    if (p.name.rfind("res.est", 0) == 0) p.node->value.fill(0.0);
  auto in = make_inputs(rng, 16, 16, 3);
  auto res = rp.decode(in.prior, in.skips, in.edge_feat, in.edge_map, in.left, in.right);
  for (const auto& m : res.maps)
    for (std::int64_t i = 0; i < m.map->value.numel(); ++i) CHECK(m.map->value.get(i) == 0.0);
}

TEST_CASE("telescoping: constant coarsest map with zero residuals doubles per scale") {
  ParamStore store;
  Rng rng(105);
  const int S = 4;
  ResidualPyramid rp(store, "res", standalone_config(S, 0), DType::F64, rng);
  for (const auto& p : store.params())
    if (p.name.rfind("res.est", 0) == 0) p.node->value.fill(0.0);
  // bias the coarsest block's output conv to a positive constant
  for (const auto& p : store.params())
    if (p.name == "res.est" + std::to_string(S - 1) + ".conv3.bias") p.node->value.fill(1.25);
  auto in = make_inputs(rng, 16, 16, 0);
  auto res = rp.decode(in.prior, in.skips, nullptr, nullptr, in.left, in.right);
  for (std::size_t i = 0; i < res.maps.size(); ++i) {
    const double want = 1.25 * std::ldexp(1.0, static_cast<int>(i));
    for (std::int64_t j = 0; j < res.maps[i].map->value.numel(); ++j)
      CHECK(res.maps[i].map->value.get(j) == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("composition is recoverable from the per-scale records") {
  ParamStore store;
  Rng rng(106);
  ResidualPyramid rp(store, "res", standalone_config(3, 3), DType::F64, rng);
  auto in = make_inputs(rng, 8, 8, 3);
  auto res = rp.decode(in.prior, in.skips, in.edge_feat, in.edge_map, in.left, in.right);
  REQUIRE(res.records.size() == 3);
  CHECK(!res.records[0].upsampled);
  for (std::size_t i = 0; i < res.records.size(); ++i) {
    const auto& rec = res.records[i];
    for (std::int64_t j = 0; j < rec.map->value.numel(); ++j) {
      const double up = i == 0 ? 0.0 : rec.upsampled->value.get(j);
      const double want = std::max(0.0, up + rec.residual->value.get(j));
      CHECK(rec.map->value.get(j) == doctest::Approx(want).epsilon(1e-12));
    }
  }
}

TEST_CASE("gradient of mean(d0) w.r.t. the scene prior is nonzero") {
  ParamStore store;
  Rng rng(107);
  ResidualPyramid rp(store, "res", standalone_config(3, 0), DType::F64, rng);
  auto in = make_inputs(rng, 8, 8, 0, DType::F64, true);
  auto res = rp.decode(in.prior, in.skips, nullptr, nullptr, in.left, in.right);
  backward(o::reduce_mean(res.maps.back().map));
  REQUIRE(in.prior->has_grad());
  double mag = 0.0;
  for (std::int64_t i = 0; i < in.prior->grad.numel(); ++i) mag += std::fabs(in.prior->grad.get(i));
  CHECK(mag > 0.0);
}

TEST_CASE("scale count must be consistent with the encoder depth") {
  ParamStore store;
  Rng rng(108);
  auto cfg = standalone_config(2, 0);  // prior at scale 2 cannot feed a 2-scale pyramid
  CHECK_THROWS_AS((void)ResidualPyramid(store, "res", cfg, DType::F64, rng), Error);
}

TEST_CASE("decode rejects extents not divisible by 2^(S-1)") {
  ParamStore store;
  Rng rng(109);
  ResidualPyramid rp(store, "res", standalone_config(3, 0), DType::F64, rng);
  auto in = make_inputs(rng, 8, 8, 0);
  auto bad_left = Node::leaf(rand_tensor({1, 3, 6, 8}, rng, 0, 1));
  CHECK_THROWS_AS((void)rp.decode(in.prior, in.skips, nullptr, nullptr, bad_left, bad_left), Error);
}

TEST_CASE("grad_check full estimation block over input and every parameter") {
  Rng rng(110);
  ParamStore store;
  EstimationBlock blk(store, "est", 4, 5, DType::F64, rng);
  auto agg = Node::leaf(rand_tensor({1, 4, 3, 4}, rng), true);
  std::vector<NodePtr> leaves{agg};
  for (const auto& p : store.params()) leaves.push_back(p.node);
  const double err =
      grad_check_leaves([&] { return o::reduce_mean(blk.forward(agg)); }, leaves);
  CHECK(err < 1e-4);
}
