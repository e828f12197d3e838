#include "edgestereo/losses.hpp"

#include <cmath>

namespace edgestereo {

namespace {
constexpr double kLogClamp = 1e-7;

std::int64_t count_nonzero(const Tensor& t) {
  std::int64_t n = 0;
  for (std::int64_t i = 0; i < t.numel(); ++i)
    if (t.get(i) != 0.0) ++n;
  return n;
}
}  // namespace

NodePtr regression_loss(const NodePtr& d, const Tensor& gt, const Tensor& valid_mask) {
  check(d->value.same_shape(gt) && d->value.same_shape(valid_mask),
        "regression_loss: shape mismatch between prediction " + d->value.shape_str() + ", gt " +
            gt.shape_str() + ", mask " + valid_mask.shape_str());
  const std::int64_t n_valid = count_nonzero(valid_mask);
  check(n_valid > 0, "regression_loss: empty valid set");
  auto gt_n = Node::leaf(gt.astype(d->dtype()), false);
  auto mask_n = Node::leaf(valid_mask.astype(d->dtype()), false);
  auto masked = ops::mul(ops::abs(ops::sub(d, gt_n)), mask_n);
  return ops::scale(ops::reduce_sum(masked), 1.0 / static_cast<double>(n_valid));
}

NodePtr edge_aware_smoothness(const NodePtr& d, const Tensor& edge_map) {
  check(d->value.same_shape(edge_map),
        "edge_aware_smoothness: edge map " + edge_map.shape_str() +
            " does not match disparity " + d->value.shape_str());
  auto e = Node::leaf(edge_map.astype(d->dtype()), false);
  auto wx = ops::exp(ops::neg(ops::abs(ops::spatial_gradient_x(e))));
  auto wy = ops::exp(ops::neg(ops::abs(ops::spatial_gradient_y(e))));
  auto gx = ops::abs(ops::spatial_gradient_x(d));
  auto gy = ops::abs(ops::spatial_gradient_y(d));
  return ops::reduce_mean(ops::add(ops::mul(gx, wx), ops::mul(gy, wy)));
}

NodePtr class_balanced_bce(const NodePtr& pred, const Tensor& label, const Tensor* ignore_mask) {
  const Tensor& p = pred->value;
  check(p.same_shape(label), "class_balanced_bce: label shape mismatch");
  if (ignore_mask) check(p.same_shape(*ignore_mask), "class_balanced_bce: ignore mask shape mismatch");

  std::int64_t n = 0, negatives = 0;
  for (std::int64_t i = 0; i < label.numel(); ++i) {
    if (ignore_mask && ignore_mask->get(i) != 0.0) continue;
    ++n;
    if (label.get(i) == 0.0) ++negatives;
  }
  check(n > 0, "class_balanced_bce: empty effective pixel set");
  const double beta = static_cast<double>(negatives) / static_cast<double>(n);

  Tensor lbl = label.astype(p.dtype());
  Tensor ign = ignore_mask ? ignore_mask->astype(p.dtype()) : Tensor();

  Tensor out({1}, p.dtype());
  dispatch(p.dtype(), [&]<typename T>() {
    auto pv = p.data<T>();
    auto lv = lbl.data<T>();
    const T* iv = ignore_mask ? ign.data<T>().data() : nullptr;
    double acc = 0.0;
    for (std::size_t i = 0; i < pv.size(); ++i) {
      if (iv && iv[i] != T(0)) continue;
      const double pc = std::clamp(static_cast<double>(pv[i]), kLogClamp, 1.0 - kLogClamp);
      const double y = lv[i];
      acc += beta * y * std::log(pc) + (1.0 - beta) * (1.0 - y) * std::log(1.0 - pc);
    }
    out.data<T>()[0] = static_cast<T>(-acc / static_cast<double>(n));
  });

  return make_op("class_balanced_bce", std::move(out), {pred},
                 [beta, n, lbl = std::move(lbl), ign = std::move(ign), has_ignore = ignore_mask != nullptr](Node& self) {
                   auto& pn = self.parents[0];
                   if (!pn->requires_grad) return;
                   Tensor g(pn->value.shape(), pn->dtype());
                   dispatch(pn->dtype(), [&]<typename T>() {
                     auto pv = pn->value.data<T>();
                     auto lv = lbl.data<T>();
                     const T* iv = has_ignore ? ign.data<T>().data() : nullptr;
                     auto dst = g.data<T>();
                     const double go = self.grad.get(0);
                     for (std::size_t i = 0; i < pv.size(); ++i) {
                       if (iv && iv[i] != T(0)) continue;
                       const double pd = pv[i];
                       if (pd < kLogClamp || pd > 1.0 - kLogClamp) continue;  // clamped: flat
                       const double y = lv[i];
                       const double dldp = -(beta * y / pd - (1.0 - beta) * (1.0 - y) / (1.0 - pd)) /
                                           static_cast<double>(n);
                       dst[i] = static_cast<T>(go * dldp);
                     }
                   });
                   pn->accumulate(std::move(g));
                 });
}

std::pair<Tensor, Tensor> downsample_gt(const Tensor& gt, const Tensor& valid) {
  check(gt.rank() == 4 && gt.same_shape(valid), "downsample_gt: shape mismatch");
  const int B = gt.dim(0), C = gt.dim(1), H = gt.dim(2), W = gt.dim(3);
  check(H % 2 == 0 && W % 2 == 0, "downsample_gt: extents must be even");
  Tensor gt2({B, C, H / 2, W / 2}, gt.dtype());
  Tensor valid2({B, C, H / 2, W / 2}, valid.dtype());
  std::int64_t o = 0;
  for (std::int64_t bc = 0; bc < static_cast<std::int64_t>(B) * C; ++bc)
    for (int y = 0; y < H / 2; ++y)
      for (int x = 0; x < W / 2; ++x, ++o) {
        double acc = 0.0;
        bool all_valid = true;
        for (int dy = 0; dy < 2; ++dy)
          for (int dx = 0; dx < 2; ++dx) {
            const std::int64_t idx = (bc * H + 2 * y + dy) * W + 2 * x + dx;
            acc += gt.get(idx);
            all_valid = all_valid && valid.get(idx) != 0.0;
          }
        // average and halve: disparity values live in the coarser grid's pixels
        gt2.set(o, acc / 8.0);
        valid2.set(o, all_valid ? 1.0 : 0.0);
      }
  return {std::move(gt2), std::move(valid2)};
}

LossBreakdown deep_supervision(const std::vector<DisparityMap>& maps, const Tensor& gt_full,
                               const Tensor& valid_full, const Tensor& edge_map, double lambda_ds,
                               int phase) {
  check(!maps.empty(), "deep_supervision: no disparity maps");
  check(phase == 2 || phase == 3, "deep_supervision: phase must be 2 or 3");
  const std::size_t S = maps.size();
  check(maps.back().map->value.same_shape(gt_full),
        "deep_supervision: finest map " + maps.back().map->value.shape_str() +
            " must match ground-truth resolution " + gt_full.shape_str());

  // ground-truth pyramid, fine to coarse
  std::vector<std::pair<Tensor, Tensor>> gts;
  gts.reserve(S);
  gts.emplace_back(gt_full, valid_full);
  for (std::size_t i = 1; i < S; ++i)
    gts.push_back(downsample_gt(gts[i - 1].first, gts[i - 1].second));

  LossBreakdown out;
  out.lambda_ds = phase == 2 ? lambda_ds : 0.0;
  out.regression.resize(S, 0.0);
  out.smoothness.resize(S, 0.0);

  NodePtr total;
  for (std::size_t i = 0; i < S; ++i) {  // coarse to fine
    const auto& m = maps[i];
    const auto& [gt_s, valid_s] = gts[S - 1 - i];
    check(m.map->value.same_shape(gt_s),
          "deep_supervision: map " + m.map->value.shape_str() + " does not match gt pyramid " +
              gt_s.shape_str());
    check(count_nonzero(valid_s) > 0, "deep_supervision: all-invalid scale");
    NodePtr lr = regression_loss(m.map, gt_s, valid_s);
    out.regression[i] = lr->value.get(0);
    NodePtr cs = lr;
    if (phase == 2) {
      Tensor edge_s = edge_map;
      if (edge_s.dim(2) != gt_s.dim(2) || edge_s.dim(3) != gt_s.dim(3))
        edge_s =
            ops::bilinear_resize(Node::leaf(edge_map, false), gt_s.dim(2), gt_s.dim(3))->value;
      NodePtr lds = edge_aware_smoothness(m.map, edge_s);
      out.smoothness[i] = lds->value.get(0);
      cs = ops::add(lr, ops::scale(lds, lambda_ds));
    }
    out.per_scale.push_back(cs->value.get(0));
    total = total ? ops::add(total, cs) : cs;
  }
  out.total = total;
  out.total_value = total->value.get(0);
  return out;
}

EvalReport evaluate(const Tensor& pred, const Tensor& gt, const Tensor& valid_mask,
                    const std::vector<double>& thresholds) {
  check(pred.same_shape(gt) && pred.same_shape(valid_mask), "evaluate: shape mismatch");
  EvalReport rep;
  std::map<double, std::int64_t> bad_count;
  for (double t : thresholds) bad_count[t] = 0;
  double err_sum = 0.0;
  for (std::int64_t i = 0; i < pred.numel(); ++i) {
    if (valid_mask.get(i) == 0.0) continue;
    ++rep.valid_count;
    const double e = std::fabs(pred.get(i) - gt.get(i));
    err_sum += e;
    for (double t : thresholds)
      if (e > t) ++bad_count[t];
  }
  check(rep.valid_count > 0, "evaluate: empty valid set");
  rep.epe = err_sum / static_cast<double>(rep.valid_count);
  for (double t : thresholds)
    rep.bad[t] = static_cast<double>(bad_count[t]) / static_cast<double>(rep.valid_count);
  return rep;
}

}  // namespace edgestereo
