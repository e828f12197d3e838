#include "edgestereo/residual_pyramid.hpp"

#include <algorithm>

namespace edgestereo {

namespace {
NodePtr resize_to(const NodePtr& x, int h, int w) {
  if (x->value.dim(2) == h && x->value.dim(3) == w) return x;
  return ops::bilinear_resize(x, h, w);
}
}  // namespace

EstimationBlock::EstimationBlock(ParamStore& store, const std::string& name, int in_channels,
                                 int hidden, DType dt, Rng& rng, double out_bias_init)
    : in_channels_(in_channels) {
  c0_ = Conv2dLayer(store, name + ".conv0", in_channels, hidden, 3, 1, 1, 1, dt, rng);
  c1_ = Conv2dLayer(store, name + ".conv1", hidden, hidden, 3, 1, 1, 1, dt, rng);
  c2_ = Conv2dLayer(store, name + ".conv2", hidden, hidden, 3, 1, 1, 1, dt, rng);
  out_ = Conv2dLayer(store, name + ".conv3", hidden, 1, 3, 1, 1, 1, dt, rng);
  out_.bias->value.fill(out_bias_init);
}

NodePtr EstimationBlock::forward(const NodePtr& agg) const {
  check(agg->value.dim(1) == in_channels_,
        "estimation block: aggregated feature has " + std::to_string(agg->value.dim(1)) +
            " channels, expected " + std::to_string(in_channels_));
  auto x = ops::relu(c0_.forward(agg));
  x = ops::relu(c1_.forward(x));
  x = ops::relu(c2_.forward(x));
  return out_.forward(x);
}

ResidualPyramid::ResidualPyramid(ParamStore& store, const std::string& name,
                                 const ResidualPyramidConfig& cfg, DType dt, Rng& rng)
    : cfg_(cfg) {
  check(cfg.scales >= 2, "residual pyramid: need at least 2 scales");
  check(cfg.scales > cfg.prior_scale,
        "residual pyramid: S=" + std::to_string(cfg.scales) +
            " inconsistent with encoder depth (scene prior sits at scale " +
            std::to_string(cfg.prior_scale) + ")");
  check(static_cast<int>(cfg.skip_channels.size()) == cfg.prior_scale,
        "residual pyramid: need one backbone skip per scale finer than the prior");
  check(cfg.prior_channels > 0 && cfg.est_hidden > 0, "residual pyramid: bad channel config");

  int ch = cfg.encoder_base;
  for (int s = cfg.prior_scale; s < cfg.scales; ++s) {
    EncoderLevel lvl;
    const std::string base = name + ".enc" + std::to_string(s);
    if (s == cfg.prior_scale) {
      lvl.down = Conv2dLayer(store, base + ".down", cfg.prior_channels, ch, 3, 1, 1, 1, dt, rng);
    } else {
      const int prev = ch;
      ch = std::min(cfg.encoder_max, ch * 2);
      lvl.down = Conv2dLayer(store, base + ".down", prev, ch, 3, 2, 1, 1, dt, rng);
    }
    lvl.refine = Conv2dLayer(store, base + ".refine", ch, ch, 3, 1, 1, 1, dt, rng);
    levels_.push_back(std::move(lvl));
  }

  const int edge_extra = cfg.edge_channels > 0 ? cfg.edge_channels + 1 : 0;
  const int geometry = 4 * cfg.image_channels + 1;
  est_blocks_.resize(static_cast<std::size_t>(cfg.scales));
  for (int s = 0; s < cfg.scales; ++s) {
    const int in_ch =
        encoder_channels(s) + edge_extra + (s == cfg.scales - 1 ? 0 : geometry);
    est_blocks_[static_cast<std::size_t>(s)] = EstimationBlock(
        store, name + ".est" + std::to_string(s), in_ch, cfg.est_hidden, dt, rng,
        s == cfg.scales - 1 ? cfg.coarse_bias_init : 0.0);
  }
}

int ResidualPyramid::encoder_channels(int scale) const {
  check(scale >= 0 && scale < cfg_.scales, "residual pyramid: scale out of range");
  if (scale < cfg_.prior_scale) return cfg_.skip_channels[static_cast<std::size_t>(scale)];
  int ch = cfg_.encoder_base;
  for (int s = cfg_.prior_scale + 1; s <= scale; ++s) ch = std::min(cfg_.encoder_max, ch * 2);
  return ch;
}

EncoderState ResidualPyramid::encode(const NodePtr& prior,
                                     const std::vector<NodePtr>& backbone_skips) const {
  check(static_cast<int>(backbone_skips.size()) == cfg_.prior_scale,
        "residual pyramid: expected " + std::to_string(cfg_.prior_scale) + " backbone skips");
  check(prior->value.dim(1) == cfg_.prior_channels,
        "residual pyramid: scene prior has " + std::to_string(prior->value.dim(1)) +
            " channels, expected " + std::to_string(cfg_.prior_channels));
  EncoderState st;
  st.features = backbone_skips;
  NodePtr x = prior;
  for (const auto& lvl : levels_) {
    x = ops::relu(lvl.refine.forward(ops::relu(lvl.down.forward(x))));
    st.features.push_back(x);
  }
  return st;
}

ResidualPyramid::DecodeResult ResidualPyramid::decode(const NodePtr& prior,
                                                      const std::vector<NodePtr>& backbone_skips,
                                                      const NodePtr& edge_feat,
                                                      const NodePtr& edge_map, const NodePtr& left,
                                                      const NodePtr& right) const {
  const int S = cfg_.scales;
  check(left->value.rank() == 4 && left->value.same_shape(right->value),
        "residual pyramid: left/right must be equal-shape images");
  const int H = left->value.dim(2), W = left->value.dim(3);
  check(H % (1 << (S - 1)) == 0 && W % (1 << (S - 1)) == 0,
        "residual pyramid: input extents " + left->value.shape_str() +
            " must be divisible by 2^(S-1)");
  if (cfg_.edge_channels > 0)
    check(edge_feat != nullptr && edge_map != nullptr,
          "residual pyramid: edge feeding enabled but edge inputs missing");

  EncoderState enc = encode(prior, backbone_skips);

  DecodeResult res;
  res.maps.reserve(static_cast<std::size_t>(S));
  NodePtr prev;
  for (int s = S - 1; s >= 0; --s) {
    const NodePtr& f = enc.features[static_cast<std::size_t>(s)];
    const int hs = H >> s, ws = W >> s;
    check(f->value.dim(2) == hs && f->value.dim(3) == ws,
          "residual pyramid: feature at scale " + std::to_string(s) + " has extents " +
              f->value.shape_str() + ", expected " + std::to_string(hs) + "x" + std::to_string(ws));

    std::vector<NodePtr> parts{f};
    if (cfg_.edge_channels > 0) {
      parts.push_back(resize_to(edge_feat, hs, ws));
      parts.push_back(resize_to(edge_map, hs, ws));
    }

    ScaleRecord rec;
    if (s == S - 1) {
      rec.residual = est_blocks_[static_cast<std::size_t>(s)].forward(ops::concat_channels(parts));
      rec.map = ops::relu(rec.residual);
    } else {
      NodePtr up = ops::scale(ops::bilinear_resize(prev, hs, ws), 2.0);
      // The geometrical constraints are heuristic cues: they see the current
      // disparity values only, so the coarse scales are trained by their own
      // supervised losses plus the composition chain, not by warp feedback.
      NodePtr up_cue = Node::leaf(up->value, false);
      NodePtr il = resize_to(left, hs, ws);
      NodePtr ir = resize_to(right, hs, ws);
      NodePtr warped = ops::warp_right_to_left(ir, up_cue);
      NodePtr err = ops::error_map(il, warped);
      parts.push_back(il);
      parts.push_back(ir);
      parts.push_back(up_cue);
      parts.push_back(warped);
      parts.push_back(err);
      rec.upsampled = up;
      rec.residual = est_blocks_[static_cast<std::size_t>(s)].forward(ops::concat_channels(parts));
      rec.map = ops::relu(ops::add(up, rec.residual));
    }
    prev = rec.map;
    res.maps.push_back(DisparityMap{rec.map, s});
    res.records.push_back(rec);
  }
  return res;
}

}  // namespace edgestereo
