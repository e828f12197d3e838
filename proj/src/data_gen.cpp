#include "edgestereo/data_gen.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace edgestereo {

namespace {

struct Layer {
  // rectangle [x0,x1) x [y0,y1); ellipse inscribed in it when round
  int x0 = 0, x1 = 0, y0 = 0, y1 = 0;
  double cx = 0, cy = 0, rx = 0, ry = 0;
  bool ellipse = false;
  double disparity = 0.0;
  std::vector<float> texture;  // [3,H,W], left-view coordinates

  bool covers(double x, double y) const {
    if (!ellipse) return x >= x0 && x < x1 && y >= y0 && y < y1;
    const double dx = (x - cx) / rx, dy = (y - cy) / ry;
    return dx * dx + dy * dy <= 1.0;
  }
};

std::vector<float> make_texture(Rng& rng, int h, int w, int smoothing) {
  std::vector<float> tex(static_cast<std::size_t>(3) * h * w);
  for (auto& v : tex) v = static_cast<float>(rng.uniform());
  std::vector<float> tmp(tex.size());
  for (int pass = 0; pass < smoothing; ++pass) {
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          double acc = 0.0;
          int n = 0;
          for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
              const int yy = y + dy, xx = x + dx;
              if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
              acc += tex[(static_cast<std::size_t>(c) * h + yy) * w + xx];
              ++n;
            }
          tmp[(static_cast<std::size_t>(c) * h + y) * w + x] = static_cast<float>(acc / n);
        }
    tex.swap(tmp);
  }
  return tex;
}

// bilinear sample of one texture channel at fractional x, integer y
double sample_texture(const std::vector<float>& tex, int c, int y, double x, int h, int w) {
  const double fl = std::floor(x);
  const double f = x - fl;
  const int x0 = std::clamp(static_cast<int>(fl), 0, w - 1);
  const int x1 = std::clamp(static_cast<int>(fl) + 1, 0, w - 1);
  const std::size_t row = (static_cast<std::size_t>(c) * h + y) * w;
  return (1.0 - f) * tex[row + x0] + f * tex[row + x1];
}

}  // namespace

StereoSample generate_stereogram(std::uint64_t seed, const GeneratorParams& p) {
  const int H = p.height, W = p.width;
  check(H >= 4 && W >= 8, "generate_stereogram: image too small");
  check(p.max_disparity >= 0 && p.max_disparity < W / 4,
        "generate_stereogram: max_disparity must be < width/4");
  check(p.layers >= 0, "generate_stereogram: layers must be >= 0");
  check(p.layers == 0 || p.max_disparity >= 1,
        "generate_stereogram: layers need a positive disparity range");

  Rng rng(seed);

  // background plus foreground layers; visibility is decided by disparity
  // (larger = nearer)
  std::vector<Layer> layers(static_cast<std::size_t>(p.layers) + 1);
  layers[0].x1 = W;
  layers[0].y1 = H;
  layers[0].texture = make_texture(rng, H, W, p.texture_smoothing);

  // distinct integer disparities in [1, max]
  std::vector<int> candidates;
  for (int d = 1; d <= p.max_disparity; ++d) candidates.push_back(d);
  for (std::size_t i = candidates.size(); i > 1; --i)
    std::swap(candidates[i - 1],
              candidates[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i) - 1))]);

  for (int i = 1; i <= p.layers; ++i) {
    Layer& ly = layers[static_cast<std::size_t>(i)];
    const int min_w = std::max(3, W / 6), min_h = std::max(3, H / 6);
    const int lw = rng.uniform_int(min_w, std::max(min_w, W / 2));
    const int lh = rng.uniform_int(min_h, std::max(min_h, H / 2));
    ly.x0 = rng.uniform_int(0, W - lw);
    ly.y0 = rng.uniform_int(0, H - lh);
    ly.x1 = ly.x0 + lw;
    ly.y1 = ly.y0 + lh;
    ly.ellipse = rng.uniform() < 0.5;
    if (ly.ellipse) {
      ly.cx = ly.x0 + lw / 2.0;
      ly.cy = ly.y0 + lh / 2.0;
      ly.rx = lw / 2.0;
      ly.ry = lh / 2.0;
    }
    double d = candidates[static_cast<std::size_t>((i - 1) % static_cast<int>(candidates.size()))];
    if (p.subpixel) d = std::max(0.25, d - 0.5 + rng.uniform(0.25, 0.75));
    ly.disparity = d;
    ly.texture = make_texture(rng, H, W, p.texture_smoothing);
  }

  const auto top_left_at = [&](int x, int y) {
    int best = 0;
    for (std::size_t i = 1; i < layers.size(); ++i)
      if (layers[i].covers(x, y) &&
          layers[i].disparity > layers[static_cast<std::size_t>(best)].disparity)
        best = static_cast<int>(i);
    return best;
  };

  StereoSample s;
  s.left = Tensor({3, H, W}, DType::F32);
  s.right = Tensor({3, H, W}, DType::F32);
  s.gt_disparity = Tensor({1, H, W}, DType::F32);
  s.valid_mask = Tensor({1, H, W}, DType::F32);
  s.gt_edges = Tensor({1, H, W}, DType::F32);

  std::vector<int> top_left(static_cast<std::size_t>(H) * W);
  std::vector<int> top_right(static_cast<std::size_t>(H) * W);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      top_left[static_cast<std::size_t>(y) * W + x] = top_left_at(x, y);
      // a layer covers right pixel x when its left footprint contains x + d
      int best = 0;
      double best_d = -1.0;
      for (std::size_t i = 0; i < layers.size(); ++i) {
        const double xl = x + layers[i].disparity;
        if (xl < W && layers[i].covers(xl, y) && layers[i].disparity > best_d) {
          best = static_cast<int>(i);
          best_d = layers[i].disparity;
        }
      }
      top_right[static_cast<std::size_t>(y) * W + x] = best;
    }

  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const std::size_t idx = static_cast<std::size_t>(y) * W + x;
      const Layer& lt = layers[static_cast<std::size_t>(top_left[idx])];
      s.gt_disparity.set(static_cast<std::int64_t>(idx), lt.disparity);
      for (int c = 0; c < 3; ++c)
        s.left.set((static_cast<std::int64_t>(c) * H + y) * W + x,
                   lt.texture[(static_cast<std::size_t>(c) * H + y) * W + x]);

      const Layer& rt = layers[static_cast<std::size_t>(top_right[idx])];
      for (int c = 0; c < 3; ++c)
        s.right.set((static_cast<std::int64_t>(c) * H + y) * W + x,
                    sample_texture(rt.texture, c, y, x + rt.disparity, H, W));

      const double xr = x - lt.disparity;
      const bool visible =
          xr >= 0.0 && top_right[static_cast<std::size_t>(y) * W +
                                 static_cast<std::size_t>(std::floor(xr))] == top_left[idx];
      s.valid_mask.set(static_cast<std::int64_t>(idx), visible ? 1.0 : 0.0);
    }

  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const auto d_at = [&](int yy, int xx) {
        return s.gt_disparity.get(static_cast<std::int64_t>(yy) * W + xx);
      };
      const double gx = x + 1 < W ? d_at(y, x + 1) - d_at(y, x) : 0.0;
      const double gy = y + 1 < H ? d_at(y + 1, x) - d_at(y, x) : 0.0;
      s.gt_edges.set(static_cast<std::int64_t>(y) * W + x,
                     std::fabs(gx) > 0.5 || std::fabs(gy) > 0.5 ? 1.0 : 0.0);
    }

  return s;
}

}  // namespace edgestereo
