#include "edgestereo/ops.hpp"

#include <algorithm>
#include <cmath>

namespace edgestereo::ops {

namespace {

void check_same(const NodePtr& a, const NodePtr& b, const char* op) {
  check(a->value.same_shape(b->value),
        std::string(op) + ": shape mismatch " + a->value.shape_str() + " vs " + b->value.shape_str());
  check(a->dtype() == b->dtype(), std::string(op) + ": dtype mismatch");
}

// Inclusive output-coordinate range [lo,hi] for which ox*stride + r lands in
// [0, limit). r = kx*dilation - pad.
struct TapRange {
  int lo, hi;
};

TapRange tap_range(int r, int stride, int limit, int out_extent) {
  int lo = 0;
  if (r < 0) lo = (-r + stride - 1) / stride;
  int hi = limit - 1 - r;
  hi = hi < 0 ? -1 : hi / stride;
  hi = std::min(hi, out_extent - 1);
  return {lo, hi};
}

template <typename T>
void conv2d_fwd_kernel(std::span<const T> in, std::span<const T> w, std::span<const T> bias,
                       std::span<T> out, int B, int C, int H, int W, int K, int kh, int kw, int Ho,
                       int Wo, int stride, int pad, int dil) {
  parallel_for(static_cast<std::int64_t>(B) * K, [&](std::int64_t bk) {
    const int b = static_cast<int>(bk / K);
    const int k = static_cast<int>(bk % K);
    const T* wk = w.data() + static_cast<std::int64_t>(k) * C * kh * kw;
    T* o = out.data() + ((static_cast<std::int64_t>(b) * K + k) * Ho) * Wo;
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(Ho) * Wo; ++i) o[i] = bias[k];
    for (int oy = 0; oy < Ho; ++oy) {
      T* orow = o + static_cast<std::int64_t>(oy) * Wo;
      for (int c = 0; c < C; ++c) {
        const T* ic = in.data() + ((static_cast<std::int64_t>(b) * C + c) * H) * W;
        const T* wc = wk + static_cast<std::int64_t>(c) * kh * kw;
        for (int ky = 0; ky < kh; ++ky) {
          const int y = oy * stride - pad + ky * dil;
          if (y < 0 || y >= H) continue;
          const T* irow = ic + static_cast<std::int64_t>(y) * W;
          for (int kx = 0; kx < kw; ++kx) {
            const T wv = wc[ky * kw + kx];
            const int r = kx * dil - pad;
            const auto [lo, hi] = tap_range(r, stride, W, Wo);
            const T* ip = irow + lo * stride + r;
            for (int ox = lo; ox <= hi; ++ox, ip += stride) orow[ox] += wv * *ip;
          }
        }
      }
    }
  });
}

template <typename T>
void conv2d_bwd_input_kernel(std::span<const T> g, std::span<const T> w, std::span<T> gin, int B,
                             int C, int H, int W, int K, int kh, int kw, int Ho, int Wo, int stride,
                             int pad, int dil) {
  for (int b = 0; b < B; ++b)
    for (int k = 0; k < K; ++k) {
      const T* gk = g.data() + ((static_cast<std::int64_t>(b) * K + k) * Ho) * Wo;
      const T* wk = w.data() + static_cast<std::int64_t>(k) * C * kh * kw;
      for (int oy = 0; oy < Ho; ++oy) {
        const T* grow = gk + static_cast<std::int64_t>(oy) * Wo;
        for (int c = 0; c < C; ++c) {
          T* gc = gin.data() + ((static_cast<std::int64_t>(b) * C + c) * H) * W;
          const T* wc = wk + static_cast<std::int64_t>(c) * kh * kw;
          for (int ky = 0; ky < kh; ++ky) {
            const int y = oy * stride - pad + ky * dil;
            if (y < 0 || y >= H) continue;
            T* grad_row = gc + static_cast<std::int64_t>(y) * W;
            for (int kx = 0; kx < kw; ++kx) {
              const T wv = wc[ky * kw + kx];
              const int r = kx * dil - pad;
              const auto [lo, hi] = tap_range(r, stride, W, Wo);
              T* gp = grad_row + lo * stride + r;
              for (int ox = lo; ox <= hi; ++ox, gp += stride) *gp += wv * grow[ox];
            }
          }
        }
      }
    }
}

template <typename T>
void conv2d_bwd_weight_kernel(std::span<const T> g, std::span<const T> in, std::span<T> gw, int B,
                              int C, int H, int W, int K, int kh, int kw, int Ho, int Wo,
                              int stride, int pad, int dil) {
  for (int b = 0; b < B; ++b)
    for (int k = 0; k < K; ++k) {
      const T* gk = g.data() + ((static_cast<std::int64_t>(b) * K + k) * Ho) * Wo;
      T* gwk = gw.data() + static_cast<std::int64_t>(k) * C * kh * kw;
      for (int c = 0; c < C; ++c) {
        const T* ic = in.data() + ((static_cast<std::int64_t>(b) * C + c) * H) * W;
        T* gwc = gwk + static_cast<std::int64_t>(c) * kh * kw;
        for (int ky = 0; ky < kh; ++ky)
          for (int kx = 0; kx < kw; ++kx) {
            const int r = kx * dil - pad;
            const auto [lo, hi] = tap_range(r, stride, W, Wo);
            T acc = 0;
            for (int oy = 0; oy < Ho; ++oy) {
              const int y = oy * stride - pad + ky * dil;
              if (y < 0 || y >= H) continue;
              const T* irow = ic + static_cast<std::int64_t>(y) * W + lo * stride + r;
              const T* grow = gk + static_cast<std::int64_t>(oy) * Wo;
              for (int ox = lo; ox <= hi; ++ox, irow += stride) acc += grow[ox] * *irow;
            }
            gwc[ky * kw + kx] += acc;
          }
      }
    }
}

}  // namespace

NodePtr conv2d(const NodePtr& input, const NodePtr& weight, const NodePtr& bias, int stride,
               int pad, int dilation) {
  const Tensor& in = input->value;
  const Tensor& w = weight->value;
  const Tensor& b = bias->value;
  check(in.rank() == 4, "conv2d: input must be [B,C,H,W], got " + in.shape_str());
  check(w.rank() == 4, "conv2d: weight must be [K,C,kh,kw], got " + w.shape_str());
  check(b.rank() == 1, "conv2d: bias must be [K]");
  check(stride >= 1 && dilation >= 1 && pad >= 0, "conv2d: bad stride/pad/dilation");
  const int B = in.dim(0), C = in.dim(1), H = in.dim(2), W = in.dim(3);
  const int K = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  check(kh >= 1 && kw >= 1, "conv2d: kernel extents must be >= 1");
  check(w.dim(1) == C, "conv2d: weight channels " + std::to_string(w.dim(1)) +
                           " do not match input channels " + std::to_string(C));
  check(b.dim(0) == K, "conv2d: bias size does not match output channels");
  check(in.dtype() == w.dtype() && in.dtype() == b.dtype(), "conv2d: dtype mismatch");
  const int Ho = (H + 2 * pad - dilation * (kh - 1) - 1) / stride + 1;
  const int Wo = (W + 2 * pad - dilation * (kw - 1) - 1) / stride + 1;
  check(H + 2 * pad >= dilation * (kh - 1) + 1 && W + 2 * pad >= dilation * (kw - 1) + 1 &&
            Ho > 0 && Wo > 0,
        "conv2d: non-positive output extent");

  Tensor out({B, K, Ho, Wo}, in.dtype());
  dispatch(in.dtype(), [&]<typename T>() {
    conv2d_fwd_kernel<T>(in.data<T>(), w.data<T>(), b.data<T>(), out.data<T>(), B, C, H, W, K, kh,
                         kw, Ho, Wo, stride, pad, dilation);
  });

  return make_op("conv2d", std::move(out), {input, weight, bias},
                 [stride, pad, dilation, B, C, H, W, K, kh, kw, Ho, Wo](Node& self) {
                   auto& in_n = self.parents[0];
                   auto& w_n = self.parents[1];
                   auto& b_n = self.parents[2];
                   const DType dt = self.grad.dtype();
                   dispatch(dt, [&]<typename T>() {
                     auto g = self.grad.data<T>();
                     if (in_n->requires_grad) {
                       Tensor gin({B, C, H, W}, dt);
                       conv2d_bwd_input_kernel<T>(g, w_n->value.data<T>(), gin.data<T>(), B, C, H,
                                                  W, K, kh, kw, Ho, Wo, stride, pad, dilation);
                       in_n->accumulate(std::move(gin));
                     }
                     if (w_n->requires_grad) {
                       Tensor gw({K, C, kh, kw}, dt);
                       conv2d_bwd_weight_kernel<T>(g, in_n->value.data<T>(), gw.data<T>(), B, C, H,
                                                   W, K, kh, kw, Ho, Wo, stride, pad, dilation);
                       w_n->accumulate(std::move(gw));
                     }
                     if (b_n->requires_grad) {
                       Tensor gb({K}, dt);
                       auto gbs = gb.data<T>();
                       for (int b2 = 0; b2 < B; ++b2)
                         for (int k = 0; k < K; ++k) {
                           const T* gk =
                               g.data() + ((static_cast<std::int64_t>(b2) * K + k) * Ho) * Wo;
                           T acc = 0;
                           for (std::int64_t i = 0; i < static_cast<std::int64_t>(Ho) * Wo; ++i)
                             acc += gk[i];
                           gbs[k] += acc;
                         }
                       b_n->accumulate(std::move(gb));
                     }
                   });
                 });
}

NodePtr relu(const NodePtr& x) {
  Tensor out(x->value.shape(), x->dtype());
  dispatch(x->dtype(), [&]<typename T>() {
    auto src = x->value.data<T>();
    auto dst = out.data<T>();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] > 0 ? src[i] : T(0);
  });
  return make_op("relu", std::move(out), {x}, [](Node& self) {
    auto& p = self.parents[0];
    if (!p->requires_grad) return;
    Tensor g(p->value.shape(), p->dtype());
    dispatch(p->dtype(), [&]<typename T>() {
      auto src = p->value.data<T>();
      auto go = self.grad.data<T>();
      auto dst = g.data<T>();
      for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] > 0 ? go[i] : T(0);
    });
    p->accumulate(std::move(g));
  });
}

NodePtr sigmoid(const NodePtr& x) {
  Tensor out(x->value.shape(), x->dtype());
  dispatch(x->dtype(), [&]<typename T>() {
    auto src = x->value.data<T>();
    auto dst = out.data<T>();
    for (std::size_t i = 0; i < src.size(); ++i) {
      const T v = src[i];
      if (v >= 0) {
        const T e = std::exp(-v);
        dst[i] = T(1) / (T(1) + e);
      } else {
        const T e = std::exp(v);
        dst[i] = e / (T(1) + e);
      }
    }
  });
  return make_op("sigmoid", std::move(out), {x}, [](Node& self) {
    auto& p = self.parents[0];
    if (!p->requires_grad) return;
    Tensor g(p->value.shape(), p->dtype());
    dispatch(p->dtype(), [&]<typename T>() {
      auto y = self.value.data<T>();
      auto go = self.grad.data<T>();
      auto dst = g.data<T>();
      for (std::size_t i = 0; i < y.size(); ++i) dst[i] = go[i] * y[i] * (T(1) - y[i]);
    });
    p->accumulate(std::move(g));
  });
}

NodePtr avg_pool(const NodePtr& x, int kernel, int stride) {
  const Tensor& in = x->value;
  check(in.rank() == 4, "avg_pool: input must be [B,C,H,W]");
  check(kernel >= 1 && stride >= 1, "avg_pool: bad kernel/stride");
  const int B = in.dim(0), C = in.dim(1), H = in.dim(2), W = in.dim(3);
  check(H >= kernel && W >= kernel, "avg_pool: kernel larger than input");
  const int Ho = (H - kernel) / stride + 1;
  const int Wo = (W - kernel) / stride + 1;
  Tensor out({B, C, Ho, Wo}, in.dtype());
  dispatch(in.dtype(), [&]<typename T>() {
    auto src = in.data<T>();
    auto dst = out.data<T>();
    const T inv = T(1) / (T(kernel) * T(kernel));
    std::int64_t o = 0;
    for (std::int64_t bc = 0; bc < static_cast<std::int64_t>(B) * C; ++bc) {
      const T* plane = src.data() + bc * H * W;
      for (int oy = 0; oy < Ho; ++oy)
        for (int ox = 0; ox < Wo; ++ox) {
          T acc = 0;
          for (int ky = 0; ky < kernel; ++ky) {
            const T* row = plane + static_cast<std::int64_t>(oy * stride + ky) * W + ox * stride;
            for (int kx = 0; kx < kernel; ++kx) acc += row[kx];
          }
          dst[o++] = acc * inv;
        }
    }
  });
  return make_op("avg_pool", std::move(out), {x}, [kernel, stride, B, C, H, W, Ho, Wo](Node& self) {
    auto& p = self.parents[0];
    if (!p->requires_grad) return;
    Tensor g({B, C, H, W}, p->dtype());
    dispatch(p->dtype(), [&]<typename T>() {
      auto go = self.grad.data<T>();
      auto dst = g.data<T>();
      const T inv = T(1) / (T(kernel) * T(kernel));
      std::int64_t o = 0;
      for (std::int64_t bc = 0; bc < static_cast<std::int64_t>(B) * C; ++bc) {
        T* plane = dst.data() + bc * H * W;
        for (int oy = 0; oy < Ho; ++oy)
          for (int ox = 0; ox < Wo; ++ox) {
            const T gv = go[o++] * inv;
            for (int ky = 0; ky < kernel; ++ky) {
              T* row = plane + static_cast<std::int64_t>(oy * stride + ky) * W + ox * stride;
              for (int kx = 0; kx < kernel; ++kx) row[kx] += gv;
            }
          }
      }
    });
    p->accumulate(std::move(g));
  });
}

namespace {
// ceil-mode adaptive window: [floor(i*n/out), ceil((i+1)*n/out))
inline std::pair<int, int> adaptive_window(int i, int n, int out) {
  const int lo = static_cast<int>((static_cast<std::int64_t>(i) * n) / out);
  const int hi = static_cast<int>((static_cast<std::int64_t>(i + 1) * n + out - 1) / out);
  return {lo, hi};
}
}  // namespace

NodePtr adaptive_avg_pool(const NodePtr& x, int out_h, int out_w) {
  const Tensor& in = x->value;
  check(in.rank() == 4, "adaptive_avg_pool: input must be [B,C,H,W]");
  check(out_h >= 1 && out_w >= 1, "adaptive_avg_pool: output extents must be >= 1");
  const int B = in.dim(0), C = in.dim(1), H = in.dim(2), W = in.dim(3);
  Tensor out({B, C, out_h, out_w}, in.dtype());
  dispatch(in.dtype(), [&]<typename T>() {
    auto src = in.data<T>();
    auto dst = out.data<T>();
    std::int64_t o = 0;
    for (std::int64_t bc = 0; bc < static_cast<std::int64_t>(B) * C; ++bc) {
      const T* plane = src.data() + bc * H * W;
      for (int oy = 0; oy < out_h; ++oy) {
        const auto [y0, y1] = adaptive_window(oy, H, out_h);
        for (int ox = 0; ox < out_w; ++ox) {
          const auto [x0, x1] = adaptive_window(ox, W, out_w);
          T acc = 0;
          for (int y = y0; y < y1; ++y)
            for (int xx = x0; xx < x1; ++xx) acc += plane[static_cast<std::int64_t>(y) * W + xx];
          dst[o++] = acc / (T(y1 - y0) * T(x1 - x0));
        }
      }
    }
  });
  return make_op("adaptive_avg_pool", std::move(out), {x}, [out_h, out_w, B, C, H, W](Node& self) {
    auto& p = self.parents[0];
    if (!p->requires_grad) return;
    Tensor g({B, C, H, W}, p->dtype());
    dispatch(p->dtype(), [&]<typename T>() {
      auto go = self.grad.data<T>();
      auto dst = g.data<T>();
      std::int64_t o = 0;
      for (std::int64_t bc = 0; bc < static_cast<std::int64_t>(B) * C; ++bc) {
        T* plane = dst.data() + bc * H * W;
        for (int oy = 0; oy < out_h; ++oy) {
          const auto [y0, y1] = adaptive_window(oy, H, out_h);
          for (int ox = 0; ox < out_w; ++ox) {
            const auto [x0, x1] = adaptive_window(ox, W, out_w);
            const T gv = go[o++] / (T(y1 - y0) * T(x1 - x0));
            for (int y = y0; y < y1; ++y)
              for (int xx = x0; xx < x1; ++xx) plane[static_cast<std::int64_t>(y) * W + xx] += gv;
          }
        }
      }
    });
    p->accumulate(std::move(g));
  });
}

namespace {
struct LinTap {
  int i0, i1;
  double f;  // weight of i1
};

inline LinTap lin_tap(int o, int in_extent, int out_extent) {
  const double src = (o + 0.5) * (static_cast<double>(in_extent) / out_extent) - 0.5;
  const double fl = std::floor(src);
  int i0 = static_cast<int>(fl);
  const double f = src - fl;
  int i1 = i0 + 1;
  i0 = std::clamp(i0, 0, in_extent - 1);
  i1 = std::clamp(i1, 0, in_extent - 1);
  return {i0, i1, f};
}
}  // namespace

NodePtr bilinear_resize(const NodePtr& x, int out_h, int out_w) {
  const Tensor& in = x->value;
  check(in.rank() == 4, "bilinear_resize: input must be [B,C,H,W]");
  check(out_h >= 1 && out_w >= 1, "bilinear_resize: output extents must be >= 1");
  const int B = in.dim(0), C = in.dim(1), H = in.dim(2), W = in.dim(3);
  Tensor out({B, C, out_h, out_w}, in.dtype());
  std::vector<LinTap> ty(static_cast<std::size_t>(out_h)), tx(static_cast<std::size_t>(out_w));
  for (int oy = 0; oy < out_h; ++oy) ty[static_cast<std::size_t>(oy)] = lin_tap(oy, H, out_h);
  for (int ox = 0; ox < out_w; ++ox) tx[static_cast<std::size_t>(ox)] = lin_tap(ox, W, out_w);
  dispatch(in.dtype(), [&]<typename T>() {
    auto src = in.data<T>();
    auto dst = out.data<T>();
    std::int64_t o = 0;
    for (std::int64_t bc = 0; bc < static_cast<std::int64_t>(B) * C; ++bc) {
      const T* plane = src.data() + bc * H * W;
      for (int oy = 0; oy < out_h; ++oy) {
        const auto& y = ty[static_cast<std::size_t>(oy)];
        for (int ox = 0; ox < out_w; ++ox) {
          const auto& xx = tx[static_cast<std::size_t>(ox)];
          const double v00 = plane[static_cast<std::int64_t>(y.i0) * W + xx.i0];
          const double v01 = plane[static_cast<std::int64_t>(y.i0) * W + xx.i1];
          const double v10 = plane[static_cast<std::int64_t>(y.i1) * W + xx.i0];
          const double v11 = plane[static_cast<std::int64_t>(y.i1) * W + xx.i1];
          const double top = v00 * (1.0 - xx.f) + v01 * xx.f;
          const double bot = v10 * (1.0 - xx.f) + v11 * xx.f;
          dst[o++] = static_cast<T>(top * (1.0 - y.f) + bot * y.f);
        }
      }
    }
  });
  return make_op("bilinear_resize", std::move(out), {x},
                 [out_h, out_w, B, C, H, W, ty = std::move(ty), tx = std::move(tx)](Node& self) {
                   auto& p = self.parents[0];
                   if (!p->requires_grad) return;
                   Tensor g({B, C, H, W}, p->dtype());
                   dispatch(p->dtype(), [&]<typename T>() {
                     auto go = self.grad.data<T>();
                     auto dst = g.data<T>();
                     std::int64_t o = 0;
                     for (std::int64_t bc = 0; bc < static_cast<std::int64_t>(B) * C; ++bc) {
                       T* plane = dst.data() + bc * H * W;
                       for (int oy = 0; oy < out_h; ++oy) {
                         const auto& y = ty[static_cast<std::size_t>(oy)];
                         for (int ox = 0; ox < out_w; ++ox) {
                           const auto& xx = tx[static_cast<std::size_t>(ox)];
                           const double gv = go[o++];
                           plane[static_cast<std::int64_t>(y.i0) * W + xx.i0] +=
                               static_cast<T>(gv * (1.0 - y.f) * (1.0 - xx.f));
                           plane[static_cast<std::int64_t>(y.i0) * W + xx.i1] +=
                               static_cast<T>(gv * (1.0 - y.f) * xx.f);
                           plane[static_cast<std::int64_t>(y.i1) * W + xx.i0] +=
                               static_cast<T>(gv * y.f * (1.0 - xx.f));
                           plane[static_cast<std::int64_t>(y.i1) * W + xx.i1] +=
                               static_cast<T>(gv * y.f * xx.f);
                         }
                       }
                     }
                   });
                   p->accumulate(std::move(g));
                 });
}

NodePtr concat_channels(const std::vector<NodePtr>& xs) {
  check(!xs.empty(), "concat_channels: no inputs");
  const Tensor& first = xs[0]->value;
  check(first.rank() == 4, "concat_channels: inputs must be [B,C,H,W]");
  const int B = first.dim(0), H = first.dim(2), W = first.dim(3);
  int total_c = 0;
  std::vector<int> channels;
  channels.reserve(xs.size());
  for (const auto& x : xs) {
    const Tensor& t = x->value;
    check(t.rank() == 4 && t.dim(0) == B && t.dim(2) == H && t.dim(3) == W,
          "concat_channels: non-channel extents differ: " + t.shape_str() + " vs " +
              first.shape_str());
    check(t.dtype() == first.dtype(), "concat_channels: dtype mismatch");
    channels.push_back(t.dim(1));
    total_c += t.dim(1);
  }
  Tensor out({B, total_c, H, W}, first.dtype());
  dispatch(first.dtype(), [&]<typename T>() {
    auto dst = out.data<T>();
    const std::int64_t plane = static_cast<std::int64_t>(H) * W;
    for (int b = 0; b < B; ++b) {
      std::int64_t off = (static_cast<std::int64_t>(b) * total_c) * plane;
      for (const auto& x : xs) {
        const int c = x->value.dim(1);
        auto src = x->value.data<T>();
        const T* sp = src.data() + (static_cast<std::int64_t>(b) * c) * plane;
        std::copy(sp, sp + static_cast<std::int64_t>(c) * plane, dst.data() + off);
        off += static_cast<std::int64_t>(c) * plane;
      }
    }
  });
  std::vector<NodePtr> parents(xs.begin(), xs.end());
  return make_op("concat_channels", std::move(out), std::move(parents),
                 [B, H, W, total_c, channels](Node& self) {
                   const std::int64_t plane = static_cast<std::int64_t>(H) * W;
                   dispatch(self.grad.dtype(), [&]<typename T>() {
                     auto go = self.grad.data<T>();
                     for (std::size_t i = 0; i < self.parents.size(); ++i) {
                       auto& p = self.parents[i];
                       if (!p->requires_grad) continue;
                       const int c = channels[i];
                       int c_off = 0;
                       for (std::size_t j = 0; j < i; ++j) c_off += channels[j];
                       Tensor g({B, c, H, W}, p->dtype());
                       auto dst = g.data<T>();
                       for (int b = 0; b < B; ++b) {
                         const T* sp =
                             go.data() + (static_cast<std::int64_t>(b) * total_c + c_off) * plane;
                         std::copy(sp, sp + static_cast<std::int64_t>(c) * plane,
                                   dst.data() + (static_cast<std::int64_t>(b) * c) * plane);
                       }
                       p->accumulate(std::move(g));
                     }
                   });
                 });
}

namespace {
template <typename Fwd, typename Bwd>
NodePtr binary_op(const char* name, const NodePtr& a, const NodePtr& b, Fwd fwd, Bwd bwd) {
  check_same(a, b, name);
  Tensor out(a->value.shape(), a->dtype());
  dispatch(a->dtype(), [&]<typename T>() {
    auto pa = a->value.data<T>();
    auto pb = b->value.data<T>();
    auto dst = out.data<T>();
    for (std::size_t i = 0; i < pa.size(); ++i) dst[i] = fwd(pa[i], pb[i]);
  });
  return make_op(name, std::move(out), {a, b}, bwd);
}
}  // namespace

NodePtr add(const NodePtr& a, const NodePtr& b) {
  return binary_op(
      "add", a, b, [](auto x, auto y) { return x + y; },
      [](Node& self) {
        for (int i = 0; i < 2; ++i) {
          auto& p = self.parents[static_cast<std::size_t>(i)];
          if (p->requires_grad) p->accumulate(self.grad);
        }
      });
}

NodePtr sub(const NodePtr& a, const NodePtr& b) {
  return binary_op(
      "sub", a, b, [](auto x, auto y) { return x - y; },
      [](Node& self) {
        if (self.parents[0]->requires_grad) self.parents[0]->accumulate(self.grad);
        auto& p = self.parents[1];
        if (!p->requires_grad) return;
        Tensor g = self.grad;
        g.scale_(-1.0);
        p->accumulate(std::move(g));
      });
}

NodePtr mul(const NodePtr& a, const NodePtr& b) {
  return binary_op(
      "mul", a, b, [](auto x, auto y) { return x * y; },
      [](Node& self) {
        dispatch(self.grad.dtype(), [&]<typename T>() {
          auto go = self.grad.data<T>();
          for (int i = 0; i < 2; ++i) {
            auto& p = self.parents[static_cast<std::size_t>(i)];
            auto& other = self.parents[static_cast<std::size_t>(1 - i)];
            if (!p->requires_grad) continue;
            Tensor g(p->value.shape(), p->dtype());
            auto dst = g.data<T>();
            auto ov = other->value.data<T>();
            for (std::size_t j = 0; j < dst.size(); ++j) dst[j] = go[j] * ov[j];
            p->accumulate(std::move(g));
          }
        });
      });
}

namespace {
template <typename Fwd, typename Bwd>
NodePtr unary_op(const char* name, const NodePtr& x, Fwd fwd, Bwd dfn) {
  Tensor out(x->value.shape(), x->dtype());
  dispatch(x->dtype(), [&]<typename T>() {
    auto src = x->value.data<T>();
    auto dst = out.data<T>();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = fwd(src[i]);
  });
  return make_op(name, std::move(out), {x}, [dfn](Node& self) {
    auto& p = self.parents[0];
    if (!p->requires_grad) return;
    Tensor g(p->value.shape(), p->dtype());
    dispatch(p->dtype(), [&]<typename T>() {
      auto src = p->value.data<T>();
      auto out_v = self.value.data<T>();
      auto go = self.grad.data<T>();
      auto dst = g.data<T>();
      for (std::size_t i = 0; i < src.size(); ++i)
        dst[i] = go[i] * static_cast<T>(dfn(static_cast<double>(src[i]), static_cast<double>(out_v[i])));
    });
    p->accumulate(std::move(g));
  });
}
}  // namespace

NodePtr neg(const NodePtr& x) {
  return unary_op(
      "neg", x, [](auto v) { return -v; }, [](double, double) { return -1.0; });
}

NodePtr abs(const NodePtr& x) {
  // subgradient 0 at exactly 0
  return unary_op(
      "abs", x, [](auto v) { return v < 0 ? -v : v; },
      [](double v, double) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); });
}

NodePtr exp(const NodePtr& x) {
  return unary_op(
      "exp", x, [](auto v) { return std::exp(v); }, [](double, double y) { return y; });
}

NodePtr scale(const NodePtr& x, double s) {
  return unary_op(
      "scale", x, [s](auto v) { return static_cast<decltype(v)>(v * s); },
      [s](double, double) { return s; });
}

NodePtr reduce_mean(const NodePtr& x) {
  const std::int64_t n = x->value.numel();
  check(n > 0, "reduce_mean: zero-size reduce");
  Tensor out({1}, x->dtype());
  dispatch(x->dtype(), [&]<typename T>() {
    T acc = 0;
    for (auto v : x->value.data<T>()) acc += v;
    out.data<T>()[0] = acc / static_cast<T>(n);
  });
  return make_op("reduce_mean", std::move(out), {x}, [n](Node& self) {
    auto& p = self.parents[0];
    if (!p->requires_grad) return;
    Tensor g(p->value.shape(), p->dtype());
    dispatch(p->dtype(), [&]<typename T>() {
      const T gv = self.grad.data<T>()[0] / static_cast<T>(n);
      for (auto& e : g.data<T>()) e = gv;
    });
    p->accumulate(std::move(g));
  });
}

NodePtr reduce_sum(const NodePtr& x) {
  const std::int64_t n = x->value.numel();
  check(n > 0, "reduce_sum: zero-size reduce");
  Tensor out({1}, x->dtype());
  dispatch(x->dtype(), [&]<typename T>() {
    T acc = 0;
    for (auto v : x->value.data<T>()) acc += v;
    out.data<T>()[0] = acc;
  });
  return make_op("reduce_sum", std::move(out), {x}, [](Node& self) {
    auto& p = self.parents[0];
    if (!p->requires_grad) return;
    Tensor g(p->value.shape(), p->dtype());
    dispatch(p->dtype(), [&]<typename T>() {
      const T gv = self.grad.data<T>()[0];
      for (auto& e : g.data<T>()) e = gv;
    });
    p->accumulate(std::move(g));
  });
}

}  // namespace edgestereo::ops
