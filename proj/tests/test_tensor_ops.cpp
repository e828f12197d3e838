#include <cmath>

#include "doctest.h"
#include "edgestereo/grad_check.hpp"
#include "edgestereo/ops.hpp"
#include "test_util.hpp"

using namespace edgestereo;
using namespace edgestereo::testing;
namespace o = edgestereo::ops;

namespace {

// Independent convolution oracle: direct summation per output element.
Tensor naive_conv2d(const Tensor& in, const Tensor& w, const Tensor& b, int stride, int pad,
                    int dil) {
  const int B = in.dim(0), C = in.dim(1), H = in.dim(2), W = in.dim(3);
  const int K = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  const int Ho = (H + 2 * pad - dil * (kh - 1) - 1) / stride + 1;
  const int Wo = (W + 2 * pad - dil * (kw - 1) - 1) / stride + 1;
  Tensor out({B, K, Ho, Wo}, in.dtype());
  for (int bb = 0; bb < B; ++bb)
    for (int k = 0; k < K; ++k)
      for (int oy = 0; oy < Ho; ++oy)
        for (int ox = 0; ox < Wo; ++ox) {
          double acc = b.get(k);
          for (int c = 0; c < C; ++c)
            for (int ky = 0; ky < kh; ++ky)
              for (int kx = 0; kx < kw; ++kx) {
                const int y = oy * stride - pad + ky * dil;
                const int x = ox * stride - pad + kx * dil;
                if (y < 0 || y >= H || x < 0 || x >= W) continue;
                acc += in.at4(bb, c, y, x) * w.at4(k, c, ky, kx);
              }
          out.set(out.offset4(bb, k, oy, ox), acc);
        }
  return out;
}

}  // namespace

TEST_CASE("conv2d all-ones 3x3 with pad 1") {
  auto in = Node::leaf(Tensor::full({1, 1, 3, 3}, 1.0, DType::F64));
  auto w = Node::leaf(Tensor::full({1, 1, 3, 3}, 1.0, DType::F64));
  auto b = Node::leaf(Tensor::zeros({1}, DType::F64));
  auto out = o::conv2d(in, w, b, 1, 1, 1);
  CHECK(out->value.shape() == std::vector<int>{1, 1, 3, 3});
  CHECK(out->value.at4(0, 0, 1, 1) == doctest::Approx(9.0));
  CHECK(out->value.at4(0, 0, 0, 0) == doctest::Approx(4.0));
  CHECK(out->value.at4(0, 0, 2, 2) == doctest::Approx(4.0));
  CHECK(out->value.at4(0, 0, 0, 1) == doctest::Approx(6.0));
}

TEST_CASE("conv2d 1x1 identity kernel is the identity map") {
  Rng rng(11);
  Tensor x = rand_tensor({2, 1, 4, 5}, rng);
  auto in = Node::leaf(x);
  auto w = Node::leaf(Tensor::full({1, 1, 1, 1}, 1.0, DType::F64));
  auto b = Node::leaf(Tensor::zeros({1}, DType::F64));
  auto out = o::conv2d(in, w, b);
  CHECK(max_abs_diff(out->value, x) == 0.0);
}

TEST_CASE("conv2d dilation 2 matches the naive oracle") {
  Rng rng(12);
  Tensor x = rand_tensor({1, 2, 5, 5}, rng);
  Tensor w = rand_tensor({1, 2, 3, 3}, rng);
  Tensor b = rand_tensor({1}, rng);
  auto out = o::conv2d(Node::leaf(x), Node::leaf(w), Node::leaf(b), 1, 0, 2);
  CHECK(out->value.shape() == std::vector<int>{1, 1, 1, 1});
  Tensor ref = naive_conv2d(x, w, b, 1, 0, 2);
  CHECK(max_abs_diff(out->value, ref) < 1e-12);
}

TEST_CASE("conv2d random shapes match the naive oracle") {
  Rng rng(13);
  struct Cfg {
    std::vector<int> in, w;
    int stride, pad, dil;
  };
  const Cfg cfgs[] = {
      {{2, 3, 7, 6}, {4, 3, 3, 3}, 1, 1, 1},  {{1, 2, 8, 8}, {3, 2, 3, 3}, 2, 1, 1},
      {{1, 4, 9, 7}, {2, 4, 3, 3}, 1, 2, 2},  {{2, 1, 5, 5}, {1, 1, 1, 1}, 1, 0, 1},
      {{1, 3, 10, 9}, {2, 3, 5, 5}, 2, 2, 1},
  };
  for (const auto& c : cfgs) {
    Tensor x = rand_tensor(c.in, rng);
    Tensor w = rand_tensor(c.w, rng);
    Tensor b = rand_tensor({c.w[0]}, rng);
    auto out = o::conv2d(Node::leaf(x), Node::leaf(w), Node::leaf(b), c.stride, c.pad, c.dil);
    Tensor ref = naive_conv2d(x, w, b, c.stride, c.pad, c.dil);
    CHECK(max_abs_diff(out->value, ref) < 1e-12);
  }
}

TEST_CASE("conv2d rejects bad shapes") {
  auto in = Node::leaf(Tensor::zeros({1, 2, 3, 3}, DType::F64));
  auto w = Node::leaf(Tensor::zeros({1, 3, 3, 3}, DType::F64));
  auto b = Node::leaf(Tensor::zeros({1}, DType::F64));
  CHECK_THROWS_AS((void)o::conv2d(in, w, b), Error);
  auto w2 = Node::leaf(Tensor::zeros({1, 2, 5, 5}, DType::F64));
  CHECK_THROWS_AS((void)o::conv2d(in, w2, b), Error);  // non-positive output extent
}

TEST_CASE("relu on the worked example") {
  auto x = Node::leaf(Tensor::from_values({1, 1, 1, 3}, {-1.0, 0.0, 2.0}, DType::F64));
  auto y = o::relu(x);
  CHECK(y->value.get(0) == 0.0);
  CHECK(y->value.get(1) == 0.0);
  CHECK(y->value.get(2) == 2.0);
}

TEST_CASE("avg_pool 2x2 stride 2") {
  auto x = Node::leaf(Tensor::from_values({1, 1, 2, 2}, {1, 2, 3, 4}, DType::F64));
  auto y = o::avg_pool(x, 2, 2);
  CHECK(y->value.shape() == std::vector<int>{1, 1, 1, 1});
  CHECK(y->value.get(0) == doctest::Approx(2.5));
}

TEST_CASE("bilinear_resize preserves constants") {
  for (const auto& [h, w] : std::vector<std::pair<int, int>>{{5, 7}, {1, 1}, {2, 9}}) {
    auto x = Node::leaf(Tensor::full({1, 2, 3, 4}, 0.625, DType::F64));
    auto y = o::bilinear_resize(x, h, w);
    CHECK(y->value.shape() == std::vector<int>{1, 2, h, w});
    for (std::int64_t i = 0; i < y->value.numel(); ++i) CHECK(y->value.get(i) == 0.625);
  }
}

TEST_CASE("avg_pool then bilinear_resize is identity on constants") {
  auto x = Node::leaf(Tensor::full({1, 1, 4, 6}, 3.5, DType::F64));
  auto y = o::bilinear_resize(o::avg_pool(x, 2, 2), 4, 6);
  CHECK(max_abs_diff(y->value, x->value) == 0.0);
}

TEST_CASE("gradient accumulates additively: y = x + x") {
  auto x = Node::leaf(rand_tensor({2, 3}, *std::make_unique<Rng>(3)), true);
  auto y = o::add(x, x);
  backward(y);
  for (std::int64_t i = 0; i < x->grad.numel(); ++i) CHECK(x->grad.get(i) == 2.0);
}

TEST_CASE("concat_channels backward splits by recorded extents bit-exactly") {
  Rng rng(5);
  auto a = Node::leaf(rand_tensor({1, 2, 3, 4}, rng), true);
  auto b = Node::leaf(rand_tensor({1, 3, 3, 4}, rng), true);
  auto c = o::concat_channels({a, b});
  CHECK(c->value.shape() == std::vector<int>{1, 5, 3, 4});
  Tensor seed = rand_tensor({1, 5, 3, 4}, rng);
  backward(c, &seed);
  for (int ch = 0; ch < 2; ++ch)
    for (int y = 0; y < 3; ++y)
      for (int x = 0; x < 4; ++x)
        CHECK(a->grad.at4(0, ch, y, x) == seed.at4(0, ch, y, x));
  for (int ch = 0; ch < 3; ++ch)
    for (int y = 0; y < 3; ++y)
      for (int x = 0; x < 4; ++x)
        CHECK(b->grad.at4(0, ch, y, x) == seed.at4(0, ch + 2, y, x));
}

TEST_CASE("concat_channels rejects mismatched extents") {
  auto a = Node::leaf(Tensor::zeros({1, 2, 3, 4}, DType::F64));
  auto b = Node::leaf(Tensor::zeros({1, 2, 3, 5}, DType::F64));
  CHECK_THROWS_AS((void)o::concat_channels({a, b}), Error);
}

TEST_CASE("non-finite operator output is an error, not a value") {
  auto x = Node::leaf(Tensor::full({1, 1, 1, 1}, 1000.0, DType::F64));
  CHECK_THROWS_AS((void)o::exp(x), Error);
}

TEST_CASE("reduce_mean of zero-size tensor is an error") {
  auto x = Node::leaf(Tensor::zeros({1, 0, 2, 2}, DType::F64));
  CHECK_THROWS_AS((void)o::reduce_mean(x), Error);
}

TEST_CASE("requires-grad false receives no gradient storage") {
  auto x = Node::leaf(Tensor::full({2, 2}, 1.0, DType::F64), false);
  auto y = Node::leaf(Tensor::full({2, 2}, 2.0, DType::F64), true);
  auto z = o::mul(x, y);
  backward(z);
  CHECK_FALSE(x->has_grad());
  CHECK(y->has_grad());
}

TEST_CASE("grad_check: f(x) = mean(x^2)") {
  Rng rng(21);
  Tensor x = rand_tensor({2, 3}, rng);
  const double err = grad_check(
      [](const std::vector<NodePtr>& in) { return o::reduce_mean(o::mul(in[0], in[0])); }, {x});
  CHECK(err < 1e-6);
}

TEST_CASE("grad_check: f(x) = mean(relu(x)) away from zero") {
  Rng rng(22);
  Tensor x = rand_tensor_off_zero({3, 4}, rng, 0.05);
  const double err = grad_check(
      [](const std::vector<NodePtr>& in) { return o::reduce_mean(o::relu(in[0])); }, {x});
  CHECK(err < 1e-6);
}

TEST_CASE("grad_check: constant function has exactly zero analytic gradient") {
  Rng rng(23);
  Tensor x = rand_tensor({2, 2}, rng);
  auto leaf = Node::leaf(x, true);
  auto y = o::reduce_mean(o::sub(leaf, leaf));
  backward(y);
  for (std::int64_t i = 0; i < leaf->grad.numel(); ++i) CHECK(leaf->grad.get(i) == 0.0);
}

TEST_CASE("grad_check rejects non-scalar objectives and bad eps") {
  Rng rng(24);
  Tensor x = rand_tensor({2, 2}, rng);
  CHECK_THROWS_AS((void)grad_check([](const std::vector<NodePtr>& in) { return in[0]; }, {x}),
                  Error);
  CHECK_THROWS_AS(
      (void)grad_check([](const std::vector<NodePtr>& in) { return o::reduce_mean(in[0]); }, {x},
                       0.5),
      Error);
  Tensor xf = rand_tensor({2, 2}, rng, -1.0, 1.0, DType::F32);
  CHECK_THROWS_AS(
      (void)grad_check([](const std::vector<NodePtr>& in) { return o::reduce_mean(in[0]); }, {xf}),
      Error);
}

TEST_CASE("grad_check conv2d/pool/resize/elementwise on random instances") {
  Rng rng(25);
  for (int i = 0; i < 3; ++i) {
    Tensor x = rand_tensor({1, 2, 5, 6}, rng);
    Tensor w = rand_tensor({2, 2, 3, 3}, rng, -0.5, 0.5);
    Tensor b = rand_tensor({2}, rng, -0.5, 0.5);
    const double err = grad_check(
        [i](const std::vector<NodePtr>& in) {
          return o::reduce_mean(o::conv2d(in[0], in[1], in[2], 1 + i % 2, 1, 1 + i % 2));
        },
        {x, w, b});
    CHECK(err < 1e-4);
  }
  {
    Rng r2(26);
    Tensor x = rand_tensor({1, 2, 6, 6}, r2);
    CHECK(grad_check([](const std::vector<NodePtr>& in) { return o::reduce_mean(o::avg_pool(in[0], 2, 2)); },
                     {x}) < 1e-4);
    CHECK(grad_check(
              [](const std::vector<NodePtr>& in) { return o::reduce_mean(o::adaptive_avg_pool(in[0], 4, 5)); },
              {x}) < 1e-4);
    CHECK(grad_check(
              [](const std::vector<NodePtr>& in) { return o::reduce_mean(o::bilinear_resize(in[0], 9, 4)); },
              {x}) < 1e-4);
    CHECK(grad_check([](const std::vector<NodePtr>& in) { return o::reduce_mean(o::sigmoid(in[0])); },
                     {x}) < 1e-4);
    Tensor y = rand_tensor({1, 2, 6, 6}, r2);
    CHECK(grad_check(
              [](const std::vector<NodePtr>& in) {
                return o::reduce_mean(o::mul(o::exp(o::neg(in[0])), o::scale(in[1], 1.7)));
              },
              {x, y}) < 1e-4);
  }
}
