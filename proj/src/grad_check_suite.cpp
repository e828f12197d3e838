#include <functional>

#include "edgestereo/grad_check.hpp"
#include "edgestereo/losses.hpp"
#include "edgestereo/residual_pyramid.hpp"

namespace edgestereo {

namespace o = ops;

namespace {

Tensor rnd(std::vector<int> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape), DType::F64);
  for (std::int64_t i = 0; i < t.numel(); ++i) t.set(i, rng.uniform(lo, hi));
  return t;
}

Tensor rnd_off_zero(std::vector<int> shape, Rng& rng, double margin) {
  Tensor t(std::move(shape), DType::F64);
  for (std::int64_t i = 0; i < t.numel(); ++i) {
    const double v = rng.uniform(margin, 1.0);
    t.set(i, rng.uniform() < 0.5 ? -v : v);
  }
  return t;
}

using CheckFn = std::function<double(Rng&)>;

double run_instances(const CheckFn& fn, Rng& rng, int n) {
  double worst = 0.0;
  for (int i = 0; i < n; ++i) worst = std::max(worst, fn(rng));
  return worst;
}

}  // namespace

std::vector<GradCheckResult> grad_check_suite(std::uint64_t seed) {
  const int kInstances = 5;
  std::vector<std::pair<std::string, CheckFn>> checks;

  checks.emplace_back("conv2d", [](Rng& rng) {
    const int stride = rng.uniform_int(1, 2), pad = rng.uniform_int(0, 2),
              dil = rng.uniform_int(1, 2);
    Tensor x = rnd({1, 2, 6, 7}, rng);
    Tensor w = rnd({2, 2, 3, 3}, rng, -0.5, 0.5);
    Tensor b = rnd({2}, rng, -0.5, 0.5);
    return grad_check(
        [=](const std::vector<NodePtr>& in) {
          return o::reduce_mean(o::conv2d(in[0], in[1], in[2], stride, pad, dil));
        },
        {x, w, b});
  });

  checks.emplace_back("relu", [](Rng& rng) {
    Tensor x = rnd_off_zero({2, 3, 4, 4}, rng, 0.05);
    return grad_check(
        [](const std::vector<NodePtr>& in) { return o::reduce_mean(o::relu(in[0])); }, {x});
  });

  checks.emplace_back("sigmoid", [](Rng& rng) {
    Tensor x = rnd({2, 2, 3, 5}, rng, -2, 2);
    return grad_check(
        [](const std::vector<NodePtr>& in) { return o::reduce_mean(o::sigmoid(in[0])); }, {x});
  });

  checks.emplace_back("avg_pool", [](Rng& rng) {
    Tensor x = rnd({1, 2, 6, 6}, rng);
    const int k = rng.uniform_int(2, 3);
    return grad_check(
        [k](const std::vector<NodePtr>& in) { return o::reduce_mean(o::avg_pool(in[0], k, k)); },
        {x});
  });

  checks.emplace_back("adaptive_avg_pool", [](Rng& rng) {
    Tensor x = rnd({1, 2, 7, 5}, rng);
    const int oh = rng.uniform_int(1, 4), ow = rng.uniform_int(1, 4);
    return grad_check(
        [oh, ow](const std::vector<NodePtr>& in) {
          return o::reduce_mean(o::adaptive_avg_pool(in[0], oh, ow));
        },
        {x});
  });

  checks.emplace_back("bilinear_resize", [](Rng& rng) {
    Tensor x = rnd({1, 2, 4, 5}, rng);
    const int oh = rng.uniform_int(2, 9), ow = rng.uniform_int(2, 9);
    return grad_check(
        [oh, ow](const std::vector<NodePtr>& in) {
          return o::reduce_mean(o::bilinear_resize(in[0], oh, ow));
        },
        {x});
  });

  checks.emplace_back("concat_channels", [](Rng& rng) {
    Tensor a = rnd({1, 2, 3, 4}, rng), b = rnd({1, 3, 3, 4}, rng);
    return grad_check(
        [](const std::vector<NodePtr>& in) {
          auto c = o::concat_channels({in[0], in[1]});
          return o::reduce_mean(o::mul(c, c));
        },
        {a, b});
  });

  checks.emplace_back("elementwise", [](Rng& rng) {
    Tensor a = rnd({2, 2, 3, 3}, rng), b = rnd({2, 2, 3, 3}, rng);
    return grad_check(
        [](const std::vector<NodePtr>& in) {
          auto t = o::add(o::mul(in[0], in[1]), o::scale(o::neg(in[1]), 0.7));
          return o::reduce_mean(o::mul(t, o::exp(o::scale(in[0], 0.3))));
        },
        {a, b});
  });

  checks.emplace_back("abs", [](Rng& rng) {
    Tensor x = rnd_off_zero({2, 2, 3, 3}, rng, 0.05);
    return grad_check(
        [](const std::vector<NodePtr>& in) { return o::reduce_mean(o::abs(in[0])); }, {x});
  });

  checks.emplace_back("correlation1d", [](Rng& rng) {
    Tensor fl = rnd({1, 3, 3, 6}, rng), fr = rnd({1, 3, 3, 6}, rng);
    const int d = rng.uniform_int(1, 3);
    return grad_check(
        [d](const std::vector<NodePtr>& in) {
          return o::reduce_mean(o::correlation1d(in[0], in[1], d).scores);
        },
        {fl, fr});
  });

  checks.emplace_back("warp_right_to_left", [](Rng& rng) {
    Tensor img = rnd({1, 2, 3, 6}, rng);
    Tensor disp({1, 1, 3, 6}, DType::F64);
    for (std::int64_t i = 0; i < disp.numel(); ++i)
      disp.set(i, rng.uniform_int(0, 2) + rng.uniform(0.2, 0.8));
    return grad_check(
        [](const std::vector<NodePtr>& in) {
          return o::reduce_mean(o::warp_right_to_left(in[0], in[1]));
        },
        {img, disp});
  });

  checks.emplace_back("error_map", [](Rng& rng) {
    Tensor a = rnd({1, 2, 3, 4}, rng), b = rnd({1, 2, 3, 4}, rng);
    return grad_check(
        [](const std::vector<NodePtr>& in) { return o::reduce_mean(o::error_map(in[0], in[1])); },
        {a, b});
  });

  checks.emplace_back("compose_disparity", [](Rng& rng) {
    Tensor c = rnd({1, 1, 2, 3}, rng, 0.3, 2.0);
    Tensor r = rnd_off_zero({1, 1, 4, 6}, rng, 0.05);
    return grad_check(
        [](const std::vector<NodePtr>& in) {
          return o::reduce_mean(o::compose_disparity(DisparityMap{in[0], 1}, in[1]).map);
        },
        {c, r});
  });

  checks.emplace_back("spatial_gradients", [](Rng& rng) {
    Tensor x = rnd({1, 1, 4, 5}, rng);
    return grad_check(
        [](const std::vector<NodePtr>& in) {
          auto [gx, gy] = o::spatial_gradients(in[0]);
          return o::reduce_mean(o::add(o::mul(gx, gx), o::mul(gy, gy)));
        },
        {x});
  });

  checks.emplace_back("regression_loss", [](Rng& rng) {
    Tensor gt = rnd({1, 1, 3, 4}, rng, 0, 4);
    Tensor d({1, 1, 3, 4}, DType::F64);
    for (std::int64_t j = 0; j < d.numel(); ++j)
      d.set(j, gt.get(j) + (rng.uniform() < 0.5 ? -1 : 1) * rng.uniform(0.1, 1.0));
    Tensor valid({1, 1, 3, 4}, DType::F64);
    for (std::int64_t j = 0; j < valid.numel(); ++j) valid.set(j, rng.uniform() < 0.8 ? 1.0 : 0.0);
    valid.set(0, 1.0);
    return grad_check(
        [gt, valid](const std::vector<NodePtr>& in) { return regression_loss(in[0], gt, valid); },
        {d});
  });

  checks.emplace_back("edge_aware_smoothness", [](Rng& rng) {
    Tensor d({1, 1, 3, 4}, DType::F64);
    double v = 0.0;
    for (std::int64_t j = 0; j < d.numel(); ++j) {
      v += (rng.uniform() < 0.5 ? -1 : 1) * rng.uniform(0.2, 1.0);
      d.set(j, v);
    }
    Tensor e = rnd({1, 1, 3, 4}, rng, 0, 1);
    return grad_check(
        [e](const std::vector<NodePtr>& in) { return edge_aware_smoothness(in[0], e); }, {d});
  });

  checks.emplace_back("class_balanced_bce", [](Rng& rng) {
    Tensor p = rnd({1, 1, 3, 4}, rng, 0.05, 0.95);
    Tensor label({1, 1, 3, 4}, DType::F64);
    for (std::int64_t j = 0; j < label.numel(); ++j)
      label.set(j, rng.uniform() < 0.5 ? 0.0 : 1.0);
    return grad_check(
        [label](const std::vector<NodePtr>& in) { return class_balanced_bce(in[0], label); }, {p});
  });

  checks.emplace_back("estimation_block", [](Rng& rng) {
    ParamStore store;
    Rng init(rng.next());
    EstimationBlock blk(store, "est", 4, 5, DType::F64, init);
    auto agg = Node::leaf(rnd({1, 4, 3, 4}, rng), true);
    std::vector<NodePtr> leaves{agg};
    for (const auto& p : store.params()) leaves.push_back(p.node);
    return grad_check_leaves([&] { return o::reduce_mean(blk.forward(agg)); }, leaves);
  });

  std::vector<GradCheckResult> results;
  Rng rng(seed);
  for (auto& [name, fn] : checks) {
    GradCheckResult r;
    r.name = name;
    r.instances = kInstances;
    Rng sub = rng.fork(std::hash<std::string>{}(name));
    r.max_rel_error = run_instances(fn, sub, kInstances);
    results.push_back(std::move(r));
  }
  return results;
}

}  // namespace edgestereo
