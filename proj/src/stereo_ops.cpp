#include "edgestereo/stereo_ops.hpp"

#include <cmath>

namespace edgestereo::ops {

CostVolume correlation1d(const NodePtr& fl, const NodePtr& fr, int max_disp) {
  const Tensor& l = fl->value;
  const Tensor& r = fr->value;
  check(l.rank() == 4 && l.same_shape(r), "correlation1d: inputs must be equal-shape [B,C,H,W]");
  check(l.dtype() == r.dtype(), "correlation1d: dtype mismatch");
  const int B = l.dim(0), C = l.dim(1), H = l.dim(2), W = l.dim(3);
  check(max_disp >= 0 && max_disp < W,
        "correlation1d: max_disp " + std::to_string(max_disp) + " must be < width " +
            std::to_string(W));
  const int D = max_disp + 1;
  Tensor out({B, D, H, W}, l.dtype());
  dispatch(l.dtype(), [&]<typename T>() {
    auto pl = l.data<T>();
    auto pr = r.data<T>();
    auto dst = out.data<T>();
    const T inv_c = T(1) / T(C);
    parallel_for(static_cast<std::int64_t>(B) * D, [&](std::int64_t bd) {
      const int b = static_cast<int>(bd / D);
      const int d = static_cast<int>(bd % D);
      for (int y = 0; y < H; ++y) {
        T* orow = dst.data() + (((static_cast<std::int64_t>(b) * D + d) * H) + y) * W;
        for (int x = 0; x < d; ++x) orow[x] = 0;
        for (int x = d; x < W; ++x) {
          T acc = 0;
          for (int c = 0; c < C; ++c) {
            const std::int64_t row = ((static_cast<std::int64_t>(b) * C + c) * H + y) * W;
            acc += pl[row + x] * pr[row + x - d];
          }
          orow[x] = acc * inv_c;
        }
      }
    });
  });
  NodePtr node =
      make_op("correlation1d", std::move(out), {fl, fr}, [B, C, H, W, D](Node& self) {
        auto& ln = self.parents[0];
        auto& rn = self.parents[1];
        dispatch(self.grad.dtype(), [&]<typename T>() {
          auto g = self.grad.data<T>();
          auto pl = ln->value.data<T>();
          auto pr = rn->value.data<T>();
          const T inv_c = T(1) / T(C);
          Tensor gl_t, gr_t;
          if (ln->requires_grad) gl_t = Tensor(ln->value.shape(), ln->dtype());
          if (rn->requires_grad) gr_t = Tensor(rn->value.shape(), rn->dtype());
          T* glp = ln->requires_grad ? gl_t.data<T>().data() : nullptr;
          T* grp = rn->requires_grad ? gr_t.data<T>().data() : nullptr;
          for (int b = 0; b < B; ++b)
            for (int d = 0; d < D; ++d)
              for (int y = 0; y < H; ++y) {
                const T* grow = g.data() + (((static_cast<std::int64_t>(b) * D + d) * H) + y) * W;
                for (int x = d; x < W; ++x) {
                  const T gv = grow[x] * inv_c;
                  if (gv == T(0)) continue;
                  for (int c = 0; c < C; ++c) {
                    const std::int64_t row = ((static_cast<std::int64_t>(b) * C + c) * H + y) * W;
                    if (glp) glp[row + x] += gv * pr[row + x - d];
                    if (grp) grp[row + x - d] += gv * pl[row + x];
                  }
                }
              }
          if (ln->requires_grad) ln->accumulate(std::move(gl_t));
          if (rn->requires_grad) rn->accumulate(std::move(gr_t));
        });
      });
  return CostVolume{node, max_disp};
}

NodePtr warp_right_to_left(const NodePtr& right, const NodePtr& disp) {
  const Tensor& img = right->value;
  const Tensor& d = disp->value;
  check(img.rank() == 4 && d.rank() == 4, "warp_right_to_left: inputs must be [B,C,H,W]");
  check(d.dim(1) == 1, "warp_right_to_left: disparity must have a single channel");
  check(img.dim(0) == d.dim(0) && img.dim(2) == d.dim(2) && img.dim(3) == d.dim(3),
        "warp_right_to_left: spatial extents of disparity " + d.shape_str() +
            " do not match image " + img.shape_str());
  check(img.dtype() == d.dtype(), "warp_right_to_left: dtype mismatch");
  const int B = img.dim(0), C = img.dim(1), H = img.dim(2), W = img.dim(3);
  Tensor out(img.shape(), img.dtype());
  dispatch(img.dtype(), [&]<typename T>() {
    auto src = img.data<T>();
    auto dv = d.data<T>();
    auto dst = out.data<T>();
    for (int b = 0; b < B; ++b)
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
          const double xs = x - static_cast<double>(
                                    dv[(static_cast<std::int64_t>(b) * H + y) * W + x]);
          const double fl = std::floor(xs);
          const double f = xs - fl;
          const int x0 = std::clamp(static_cast<int>(fl), 0, W - 1);
          const int x1 = std::clamp(static_cast<int>(fl) + 1, 0, W - 1);
          for (int c = 0; c < C; ++c) {
            const std::int64_t row = ((static_cast<std::int64_t>(b) * C + c) * H + y) * W;
            dst[row + x] = static_cast<T>((1.0 - f) * src[row + x0] + f * src[row + x1]);
          }
        }
  });
  return make_op("warp_right_to_left", std::move(out), {right, disp}, [B, C, H, W](Node& self) {
    auto& rn = self.parents[0];
    auto& dn = self.parents[1];
    dispatch(self.grad.dtype(), [&]<typename T>() {
      auto g = self.grad.data<T>();
      auto src = rn->value.data<T>();
      auto dv = dn->value.data<T>();
      Tensor gr_t, gd_t;
      if (rn->requires_grad) gr_t = Tensor(rn->value.shape(), rn->dtype());
      if (dn->requires_grad) gd_t = Tensor(dn->value.shape(), dn->dtype());
      T* grp = rn->requires_grad ? gr_t.data<T>().data() : nullptr;
      T* gdp = dn->requires_grad ? gd_t.data<T>().data() : nullptr;
      for (int b = 0; b < B; ++b)
        for (int y = 0; y < H; ++y)
          for (int x = 0; x < W; ++x) {
            const std::int64_t didx = (static_cast<std::int64_t>(b) * H + y) * W + x;
            const double xs = x - static_cast<double>(dv[didx]);
            const double fl = std::floor(xs);
            const double f = xs - fl;
            const int x0 = std::clamp(static_cast<int>(fl), 0, W - 1);
            const int x1 = std::clamp(static_cast<int>(fl) + 1, 0, W - 1);
            double gd_acc = 0.0;
            for (int c = 0; c < C; ++c) {
              const std::int64_t row = ((static_cast<std::int64_t>(b) * C + c) * H + y) * W;
              const double gv = g[row + x];
              if (grp) {
                grp[row + x0] += static_cast<T>(gv * (1.0 - f));
                grp[row + x1] += static_cast<T>(gv * f);
              }
              // d out / d disp = -(d out / d xs) = -(src[x1] - src[x0])
              gd_acc -= gv * (static_cast<double>(src[row + x1]) - static_cast<double>(src[row + x0]));
            }
            if (gdp) gdp[didx] += static_cast<T>(gd_acc);
          }
      if (rn->requires_grad) rn->accumulate(std::move(gr_t));
      if (dn->requires_grad) dn->accumulate(std::move(gd_t));
    });
  });
}

NodePtr error_map(const NodePtr& left, const NodePtr& synthesized) {
  check(left->value.same_shape(synthesized->value), "error_map: shape mismatch");
  return abs(sub(left, synthesized));
}

DisparityMap compose_disparity(const DisparityMap& coarse, const NodePtr& residual) {
  const Tensor& c = coarse.map->value;
  const Tensor& r = residual->value;
  check(c.rank() == 4 && r.rank() == 4, "compose_disparity: inputs must be [B,1,h,w]");
  check(r.dim(2) == 2 * c.dim(2) && r.dim(3) == 2 * c.dim(3),
        "compose_disparity: residual extents " + r.shape_str() + " must be exactly 2x coarse " +
            c.shape_str());
  NodePtr up = scale(bilinear_resize(coarse.map, r.dim(2), r.dim(3)), 2.0);
  return DisparityMap{relu(add(up, residual)), coarse.scale - 1};
}

NodePtr spatial_gradient_x(const NodePtr& x) {
  const Tensor& in = x->value;
  check(in.rank() == 4, "spatial_gradient_x: input must be [B,C,H,W]");
  const int B = in.dim(0), C = in.dim(1), H = in.dim(2), W = in.dim(3);
  Tensor out(in.shape(), in.dtype());
  dispatch(in.dtype(), [&]<typename T>() {
    auto src = in.data<T>();
    auto dst = out.data<T>();
    for (std::int64_t bc = 0; bc < static_cast<std::int64_t>(B) * C; ++bc)
      for (int y = 0; y < H; ++y) {
        const T* irow = src.data() + (bc * H + y) * W;
        T* orow = dst.data() + (bc * H + y) * W;
        for (int xx = 0; xx + 1 < W; ++xx) orow[xx] = irow[xx + 1] - irow[xx];
        orow[W - 1] = 0;
      }
  });
  return make_op("spatial_gradient_x", std::move(out), {x}, [B, C, H, W](Node& self) {
    auto& p = self.parents[0];
    if (!p->requires_grad) return;
    Tensor g(p->value.shape(), p->dtype());
    dispatch(p->dtype(), [&]<typename T>() {
      auto go = self.grad.data<T>();
      auto dst = g.data<T>();
      for (std::int64_t bc = 0; bc < static_cast<std::int64_t>(B) * C; ++bc)
        for (int y = 0; y < H; ++y) {
          const T* grow = go.data() + (bc * H + y) * W;
          T* orow = dst.data() + (bc * H + y) * W;
          for (int xx = 0; xx < W; ++xx) {
            T acc = 0;
            if (xx + 1 < W) acc -= grow[xx];
            if (xx > 0) acc += grow[xx - 1];
            orow[xx] = acc;
          }
        }
    });
    p->accumulate(std::move(g));
  });
}

NodePtr spatial_gradient_y(const NodePtr& x) {
  const Tensor& in = x->value;
  check(in.rank() == 4, "spatial_gradient_y: input must be [B,C,H,W]");
  const int B = in.dim(0), C = in.dim(1), H = in.dim(2), W = in.dim(3);
  Tensor out(in.shape(), in.dtype());
  dispatch(in.dtype(), [&]<typename T>() {
    auto src = in.data<T>();
    auto dst = out.data<T>();
    for (std::int64_t bc = 0; bc < static_cast<std::int64_t>(B) * C; ++bc)
      for (int y = 0; y < H; ++y) {
        const T* irow = src.data() + (bc * H + y) * W;
        T* orow = dst.data() + (bc * H + y) * W;
        if (y + 1 < H) {
          const T* nrow = irow + W;
          for (int xx = 0; xx < W; ++xx) orow[xx] = nrow[xx] - irow[xx];
        } else {
          for (int xx = 0; xx < W; ++xx) orow[xx] = 0;
        }
      }
  });
  return make_op("spatial_gradient_y", std::move(out), {x}, [B, C, H, W](Node& self) {
    auto& p = self.parents[0];
    if (!p->requires_grad) return;
    Tensor g(p->value.shape(), p->dtype());
    dispatch(p->dtype(), [&]<typename T>() {
      auto go = self.grad.data<T>();
      auto dst = g.data<T>();
      for (std::int64_t bc = 0; bc < static_cast<std::int64_t>(B) * C; ++bc)
        for (int y = 0; y < H; ++y) {
          const T* grow = go.data() + (bc * H + y) * W;
          T* orow = dst.data() + (bc * H + y) * W;
          for (int xx = 0; xx < W; ++xx) {
            T acc = 0;
            if (y + 1 < H) acc -= grow[xx];
            if (y > 0) acc += go[(bc * H + y - 1) * W + xx];
            orow[xx] = acc;
          }
        }
    });
    p->accumulate(std::move(g));
  });
}

std::pair<NodePtr, NodePtr> spatial_gradients(const NodePtr& x) {
  return {spatial_gradient_x(x), spatial_gradient_y(x)};
}

}  // namespace edgestereo::ops
