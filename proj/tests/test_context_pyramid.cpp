#include "doctest.h"
#include "edgestereo/context_pyramid.hpp"
#include "test_util.hpp"

using namespace edgestereo;
using namespace edgestereo::testing;
namespace o = edgestereo::ops;

namespace {
const char* kNamedConfigs[] = {"C-7_5_3_1",  "C-9_7_5_3", "C-11_9_7_5", "P-1_2_4_8",
                               "P-2_4_8_16", "D-6_3_2_1", "D-12_9_6_3", "D-24_18_12_6"};

void set_params_by_prefix(ParamStore& store, const std::string& prefix, double v) {
  for (const auto& p : store.params())
    if (p.name.rfind(prefix, 0) == 0) p.node->value.fill(v);
}
}  // namespace

TEST_CASE("notation parses and round-trips for all eight named configurations") {
  for (const char* s : kNamedConfigs) {
    auto cfg = ContextPyramidConfig::parse(s);
    CHECK(cfg.notation() == s);
  }
  CHECK(ContextPyramidConfig::parse("C-7_5_3_1").kind == PyramidKind::Convolution);
  CHECK(ContextPyramidConfig::parse("P-1_2_4_8").kind == PyramidKind::Pooling);
  CHECK(ContextPyramidConfig::parse("D-6_3_2_1").kind == PyramidKind::Dilation);
}

TEST_CASE("notation rejects malformed strings") {
  CHECK_THROWS_AS((void)ContextPyramidConfig::parse("X-1_2_4_8"), Error);
  CHECK_THROWS_AS((void)ContextPyramidConfig::parse("P-1_2_4"), Error);
  CHECK_THROWS_AS((void)ContextPyramidConfig::parse("P-1_2_4_8_16"), Error);
  CHECK_THROWS_AS((void)ContextPyramidConfig::parse("P-8_4_2_1"), Error);  // wrong order
  CHECK_THROWS_AS((void)ContextPyramidConfig::parse("C-1_3_5_7"), Error);  // wrong order
  CHECK_THROWS_AS((void)ContextPyramidConfig::parse("C-8_6_4_2"), Error);  // even kernels
  CHECK_THROWS_AS((void)ContextPyramidConfig::parse("D-6_3_x_1"), Error);
}

TEST_CASE("all eight named configurations construct and run forward/backward") {
  Rng seed(77);
  for (const char* s : kNamedConfigs) {
    ParamStore store;
    Rng rng(seed.next());
    auto cfg = ContextPyramidConfig::parse(s, 8);
    ContextPyramid py(store, "py", cfg, 32, DType::F64, rng);
    auto fm = Node::leaf(rand_tensor({1, 32, 8, 16}, rng), true);
    auto prior = py.scene_prior(fm);
    CHECK(prior->value.shape() == std::vector<int>{1, 32 + 4 * 8, 8, 16});
    backward(o::reduce_mean(prior));
    CHECK(fm->has_grad());
    for (const auto& p : store.params()) CHECK(p.node->has_grad());
  }
}

TEST_CASE("default branch width quarters the input channels") {
  ParamStore store;
  Rng rng(78);
  ContextPyramid py(store, "py", ContextPyramidConfig::parse("P-1_2_4_8"), 128, DType::F64, rng);
  CHECK(py.branch_channels() == 32);
  CHECK(py.out_channels() == 256);
}

TEST_CASE("pooling branch with pooled size 1 keeps constants constant") {
  ParamStore store;
  Rng rng(79);
  ContextPyramid py(store, "py", ContextPyramidConfig::parse("P-1_2_4_8", 4), 8, DType::F64, rng);
  auto fm = Node::leaf(Tensor::full({1, 8, 6, 6}, 0.7, DType::F64));
  auto out = py.branch_forward(0, fm);
  CHECK(out->value.shape() == std::vector<int>{1, 4, 6, 6});
  for (int c = 0; c < 4; ++c) {
    const double v0 = out->value.at4(0, c, 0, 0);
    for (int y = 0; y < 6; ++y)
      for (int x = 0; x < 6; ++x) CHECK(out->value.at4(0, c, y, x) == doctest::Approx(v0));
  }
}

TEST_CASE("convolution branch with kernel 1 and identity weights passes the input through") {
  ParamStore store;
  Rng rng(80);
  // C-7_5_3_1: branch 3 has kernel 1
  ContextPyramid py(store, "py", ContextPyramidConfig::parse("C-7_5_3_1", 3), 3, DType::F64, rng);
  for (const auto& p : store.params()) {
    if (p.name.rfind("py.branch3.", 0) != 0) continue;
    p.node->value.fill(0.0);
    if (p.name.find(".weight") != std::string::npos)
      for (int c = 0; c < 3; ++c) p.node->value.set(p.node->value.offset4(c, c, 0, 0), 1.0);
  }
  Rng rng2(81);
  Tensor x = rand_tensor({1, 3, 4, 5}, rng2, 0.0, 1.0);  // non-negative: relu transparent
  auto out = py.branch_forward(3, Node::leaf(x));
  CHECK(max_abs_diff(out->value, x) < 1e-12);
}

TEST_CASE("dilated branches preserve spatial extents on a 7x7 input") {
  ParamStore store;
  Rng rng(82);
  ContextPyramid py(store, "py", ContextPyramidConfig::parse("D-6_3_2_1", 4), 6, DType::F64, rng);
  auto fm = Node::leaf(rand_tensor({1, 6, 7, 7}, rng));
  for (int i = 0; i < 4; ++i) {
    auto out = py.branch_forward(i, fm);
    CHECK(out->value.shape() == std::vector<int>{1, 4, 7, 7});
  }
}

TEST_CASE("zeroing all branch weights leaves prior = [fm, zeros]") {
  ParamStore store;
  Rng rng(83);
  ContextPyramid py(store, "py", ContextPyramidConfig::parse("D-6_3_2_1", 4), 6, DType::F64, rng);
  set_params_by_prefix(store, "py.", 0.0);
  Tensor x = rand_tensor({1, 6, 6, 8}, rng);
  auto prior = py.scene_prior(Node::leaf(x));
  CHECK(prior->value.dim(1) == 6 + 16);
  for (int c = 0; c < 6; ++c)
    for (int y = 0; y < 6; ++y)
      for (int xx = 0; xx < 8; ++xx) CHECK(prior->value.at4(0, c, y, xx) == x.at4(0, c, y, xx));
  for (int c = 6; c < 22; ++c)
    for (int y = 0; y < 6; ++y)
      for (int xx = 0; xx < 8; ++xx) CHECK(prior->value.at4(0, c, y, xx) == 0.0);
}

TEST_CASE("fixed branch order yields bit-identical priors across runs") {
  auto build_and_run = [] {
    ParamStore store;
    Rng rng(84);
    ContextPyramid py(store, "py", ContextPyramidConfig::parse("P-1_2_4_8", 4), 8, DType::F32, rng);
    Rng rng2(85);
    return py.scene_prior(Node::leaf(rand_tensor({1, 8, 8, 8}, rng2, -1, 1, DType::F32)))->value;
  };
  Tensor a = build_and_run();
  Tensor b = build_and_run();
  CHECK(a.bitwise_equal(b));
}

TEST_CASE("gradient reaches the mixed feature through the prior") {
  ParamStore store;
  Rng rng(86);
  ContextPyramid py(store, "py", ContextPyramidConfig::parse("C-7_5_3_1", 4), 8, DType::F64, rng);
  auto fm = Node::leaf(rand_tensor({1, 8, 8, 8}, rng), true);
  backward(o::reduce_mean(py.scene_prior(fm)));
  REQUIRE(fm->has_grad());
  double mag = 0.0;
  for (std::int64_t i = 0; i < fm->grad.numel(); ++i) mag += std::fabs(fm->grad.get(i));
  CHECK(mag > 0.0);
}
