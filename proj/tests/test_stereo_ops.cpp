#include <cmath>

#include "doctest.h"
#include "edgestereo/grad_check.hpp"
#include "edgestereo/stereo_ops.hpp"
#include "test_util.hpp"

using namespace edgestereo;
using namespace edgestereo::testing;
namespace o = edgestereo::ops;

namespace {

// Independent double-loop oracle for the 1-d correlation.
Tensor naive_correlation(const Tensor& fl, const Tensor& fr, int max_disp) {
  const int B = fl.dim(0), C = fl.dim(1), H = fl.dim(2), W = fl.dim(3);
  Tensor out({B, max_disp + 1, H, W}, fl.dtype());
  for (int b = 0; b < B; ++b)
    for (int d = 0; d <= max_disp; ++d)
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
          double acc = 0.0;
          if (x - d >= 0)
            for (int c = 0; c < C; ++c) acc += fl.at4(b, c, y, x) * fr.at4(b, c, y, x - d);
          out.set(out.offset4(b, d, y, x), acc / C);
        }
  return out;
}

NodePtr row_tensor(const std::vector<double>& vals) {
  return Node::leaf(Tensor::from_values({1, 1, 1, static_cast<int>(vals.size())}, vals, DType::F64));
}

}  // namespace

TEST_CASE("correlation1d worked example") {
  auto f = row_tensor({1, 2, 3, 4});
  auto cv = o::correlation1d(f, f, 1);
  CHECK(cv.scores->value.shape() == std::vector<int>{1, 2, 1, 4});
  const double ch0[] = {1, 4, 9, 16};
  const double ch1[] = {0, 2, 6, 12};
  for (int x = 0; x < 4; ++x) {
    CHECK(cv.scores->value.at4(0, 0, 0, x) == doctest::Approx(ch0[x]));
    CHECK(cv.scores->value.at4(0, 1, 0, x) == doctest::Approx(ch1[x]));
  }
}

TEST_CASE("correlation1d with a zero operand is zero") {
  Rng rng(31);
  auto fl = Node::leaf(rand_tensor({1, 3, 2, 5}, rng));
  auto fr = Node::leaf(Tensor::zeros({1, 3, 2, 5}, DType::F64));
  auto cv = o::correlation1d(fl, fr, 2);
  for (std::int64_t i = 0; i < cv.scores->value.numel(); ++i)
    CHECK(cv.scores->value.get(i) == 0.0);
}

TEST_CASE("correlation1d normalizes by channel count") {
  auto fl = Node::leaf(Tensor::full({1, 2, 2, 3}, 1.0, DType::F64));
  auto cv = o::correlation1d(fl, fl, 1);
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 3; ++x) {
      CHECK(cv.scores->value.at4(0, 0, y, x) == doctest::Approx(1.0));
      CHECK(cv.scores->value.at4(0, 1, y, x) == doctest::Approx(x >= 1 ? 1.0 : 0.0));
    }
}

TEST_CASE("correlation1d channel 0 equals the channel-mean of f^2") {
  Rng rng(32);
  for (int i = 0; i < 4; ++i) {
    Tensor f = rand_tensor({2, 3, 3, 6}, rng);
    auto cv = o::correlation1d(Node::leaf(f), Node::leaf(f), 3);
    for (int b = 0; b < 2; ++b)
      for (int y = 0; y < 3; ++y)
        for (int x = 0; x < 6; ++x) {
          double ref = 0.0;
          for (int c = 0; c < 3; ++c) ref += f.at4(b, c, y, x) * f.at4(b, c, y, x);
          CHECK(cv.scores->value.at4(b, 0, y, x) == doctest::Approx(ref / 3).epsilon(1e-12));
        }
  }
}

TEST_CASE("correlation1d matches the naive oracle and validates max_disp") {
  Rng rng(33);
  Tensor fl = rand_tensor({2, 4, 3, 7}, rng);
  Tensor fr = rand_tensor({2, 4, 3, 7}, rng);
  auto cv = o::correlation1d(Node::leaf(fl), Node::leaf(fr), 4);
  CHECK(max_abs_diff(cv.scores->value, naive_correlation(fl, fr, 4)) < 1e-12);
  CHECK_THROWS_AS((void)o::correlation1d(Node::leaf(fl), Node::leaf(fr), 7), Error);
}

TEST_CASE("warp with zero disparity is the identity") {
  Rng rng(34);
  Tensor img = rand_tensor({1, 3, 4, 6}, rng);
  auto out = o::warp_right_to_left(Node::leaf(img), Node::leaf(Tensor::zeros({1, 1, 4, 6}, DType::F64)));
  CHECK(max_abs_diff(out->value, img) == 0.0);
}

TEST_CASE("warp worked examples: integer and half-pixel shifts") {
  auto right = row_tensor({0, 10, 20, 30});
  {
    auto disp = Node::leaf(Tensor::full({1, 1, 1, 4}, 1.0, DType::F64));
    auto out = o::warp_right_to_left(right, disp);
    const double want[] = {0, 0, 10, 20};
    for (int x = 0; x < 4; ++x) CHECK(out->value.get(x) == doctest::Approx(want[x]));
  }
  {
    auto disp = Node::leaf(Tensor::full({1, 1, 1, 4}, 0.5, DType::F64));
    auto out = o::warp_right_to_left(right, disp);
    const double want[] = {0, 5, 15, 25};
    for (int x = 0; x < 4; ++x) CHECK(out->value.get(x) == doctest::Approx(want[x]));
  }
}

TEST_CASE("warp with integer disparity equals an exact border-clamped shift") {
  Rng rng(35);
  Tensor img = rand_tensor({1, 2, 3, 8}, rng);
  const int d = 3;
  auto out = o::warp_right_to_left(Node::leaf(img),
                                   Node::leaf(Tensor::full({1, 1, 3, 8}, double(d), DType::F64)));
  for (int c = 0; c < 2; ++c)
    for (int y = 0; y < 3; ++y)
      for (int x = 0; x < 8; ++x) {
        const int xs = std::max(0, x - d);
        CHECK(out->value.at4(0, c, y, x) == doctest::Approx(img.at4(0, c, y, xs)));
      }
}

TEST_CASE("error_map definition and symmetry") {
  auto a = row_tensor({1, 2});
  auto b = row_tensor({3, 0});
  auto e1 = o::error_map(a, b);
  CHECK(e1->value.get(0) == 2.0);
  CHECK(e1->value.get(1) == 2.0);
  auto e2 = o::error_map(b, a);
  CHECK(max_abs_diff(e1->value, e2->value) == 0.0);
  auto self = o::error_map(a, a);
  CHECK(self->value.get(0) == 0.0);
  CHECK(self->value.get(1) == 0.0);
}

TEST_CASE("compose_disparity worked examples") {
  {
    DisparityMap coarse{Node::leaf(Tensor::full({1, 1, 1, 1}, 2.0, DType::F64)), 1};
    auto d = o::compose_disparity(coarse, Node::leaf(Tensor::zeros({1, 1, 2, 2}, DType::F64)));
    CHECK(d.scale == 0);
    for (std::int64_t i = 0; i < 4; ++i) CHECK(d.map->value.get(i) == doctest::Approx(4.0));
  }
  {
    Rng rng(36);
    Tensor c = rand_tensor({1, 1, 2, 3}, rng, 0.0, 5.0);
    DisparityMap coarse{Node::leaf(c), 1};
    auto d = o::compose_disparity(coarse, Node::leaf(Tensor::zeros({1, 1, 4, 6}, DType::F64)));
    auto up = o::scale(o::bilinear_resize(Node::leaf(c), 4, 6), 2.0);
    CHECK(max_abs_diff(d.map->value, up->value) == 0.0);
  }
  {
    Rng rng(37);
    Tensor r = rand_tensor({1, 1, 2, 2}, rng, -2.0, 2.0);
    DisparityMap coarse{Node::leaf(Tensor::zeros({1, 1, 1, 1}, DType::F64)), 1};
    auto d = o::compose_disparity(coarse, Node::leaf(r));
    for (std::int64_t i = 0; i < 4; ++i)
      CHECK(d.map->value.get(i) == doctest::Approx(std::max(0.0, r.get(i))));
  }
  {
    DisparityMap coarse{Node::leaf(Tensor::zeros({1, 1, 2, 2}, DType::F64)), 1};
    CHECK_THROWS_AS(
        (void)o::compose_disparity(coarse, Node::leaf(Tensor::zeros({1, 1, 3, 4}, DType::F64))),
        Error);
  }
}

TEST_CASE("compose_disparity telescopes with zero residuals") {
  const int S = 4;
  const double v = 1.5;
  DisparityMap d{Node::leaf(Tensor::full({1, 1, 2, 3}, v, DType::F64)), S - 1};
  int h = 2, w = 3;
  for (int s = S - 1; s > 0; --s) {
    h *= 2;
    w *= 2;
    d = o::compose_disparity(d, Node::leaf(Tensor::zeros({1, 1, h, w}, DType::F64)));
  }
  CHECK(d.scale == 0);
  const double want = std::ldexp(v, S - 1);  // 2^(S-1) * v
  for (std::int64_t i = 0; i < d.map->value.numel(); ++i)
    CHECK(d.map->value.get(i) == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("spatial gradients: forward differences with zero last column/row") {
  {
    auto x = Node::leaf(Tensor::full({1, 1, 3, 4}, 2.2, DType::F64));
    auto [gx, gy] = o::spatial_gradients(x);
    CHECK(max_abs_diff(gx->value, Tensor::zeros({1, 1, 3, 4}, DType::F64)) == 0.0);
    CHECK(max_abs_diff(gy->value, Tensor::zeros({1, 1, 3, 4}, DType::F64)) == 0.0);
  }
  {
    auto x = row_tensor({0, 1, 3});
    auto gx = o::spatial_gradient_x(x);
    CHECK(gx->value.get(0) == 1.0);
    CHECK(gx->value.get(1) == 2.0);
    CHECK(gx->value.get(2) == 0.0);
  }
  {
    Tensor col({1, 1, 4, 2}, DType::F64);
    for (int y = 0; y < 4; ++y)
      for (int x = 0; x < 2; ++x) col.set(col.offset4(0, 0, y, x), 3.0 * y);
    auto gy = o::spatial_gradient_y(Node::leaf(col));
    for (int y = 0; y < 3; ++y)
      for (int x = 0; x < 2; ++x) CHECK(gy->value.at4(0, 0, y, x) == 3.0);
    for (int x = 0; x < 2; ++x) CHECK(gy->value.at4(0, 0, 3, x) == 0.0);
  }
}

TEST_CASE("grad_check stereo operators") {
  Rng rng(38);
  for (int i = 0; i < 3; ++i) {
    Tensor fl = rand_tensor({1, 2, 2, 5}, rng);
    Tensor fr = rand_tensor({1, 2, 2, 5}, rng);
    CHECK(grad_check(
              [](const std::vector<NodePtr>& in) {
                return o::reduce_mean(o::correlation1d(in[0], in[1], 2).scores);
              },
              {fl, fr}) < 1e-4);
  }
  for (int i = 0; i < 3; ++i) {
    Tensor img = rand_tensor({1, 2, 3, 6}, rng);
    // disparities bounded away from integer sampling boundaries
    Tensor disp({1, 1, 3, 6}, DType::F64);
    for (std::int64_t j = 0; j < disp.numel(); ++j)
      disp.set(j, rng.uniform_int(0, 2) + rng.uniform(0.2, 0.8));
    CHECK(grad_check(
              [](const std::vector<NodePtr>& in) {
                return o::reduce_mean(o::warp_right_to_left(in[0], in[1]));
              },
              {img, disp}) < 1e-4);
  }
  {
    Tensor a = rand_tensor({1, 1, 2, 4}, rng);
    Tensor b = rand_tensor({1, 1, 2, 4}, rng);
    CHECK(grad_check(
              [](const std::vector<NodePtr>& in) { return o::reduce_mean(o::error_map(in[0], in[1])); },
              {a, b}) < 1e-4);
  }
  {
    Tensor c = rand_tensor({1, 1, 2, 3}, rng, 0.3, 2.0);
    Tensor r = rand_tensor_off_zero({1, 1, 4, 6}, rng, 0.05);
    CHECK(grad_check(
              [](const std::vector<NodePtr>& in) {
                return o::reduce_mean(o::compose_disparity(DisparityMap{in[0], 1}, in[1]).map);
              },
              {c, r}) < 1e-4);
  }
  {
    Tensor x = rand_tensor({1, 1, 4, 5}, rng);
    CHECK(grad_check(
              [](const std::vector<NodePtr>& in) {
                auto [gx, gy] = o::spatial_gradients(in[0]);
                return o::reduce_mean(o::add(o::mul(gx, gx), o::mul(gy, gy)));
              },
              {x}) < 1e-4);
  }
}
