#pragma once

#include <optional>
#include <vector>

#include "edgestereo/layers.hpp"
#include "edgestereo/stereo_ops.hpp"

namespace edgestereo {

// Per-scale features the decoder skips from. features[s] lives at full
// resolution divided by 2^s; exactly S scales are recorded. Scales finer than
// the scene prior come from the shared backbone, the rest from the prior
// encoder stack.
struct EncoderState {
  std::vector<NodePtr> features;
};

struct ResidualPyramidConfig {
  int scales = 7;        // S; coarsest map at 1/2^(S-1)
  int prior_scale = 2;   // scale index of the scene prior (shared stride log2)
  int prior_channels = 0;
  std::vector<int> skip_channels;  // backbone features for scales 0..prior_scale-1
  int edge_channels = 0;           // 0 disables edge feeding
  int image_channels = 3;
  int encoder_base = 64;
  int encoder_max = 128;
  int est_hidden = 32;
  // Initial output bias of the coarsest estimation block. Starting the
  // coarse map at a positive constant keeps it clear of the >= 0 clamp's
  // dead zone during the first optimizer steps.
  double coarse_bias_init = 0.5;
};

// Four 3x3 convolutions; every layer but the last is followed by a ReLU, the
// last regresses a single-channel disparity or residual map.
class EstimationBlock {
 public:
  EstimationBlock() = default;
  EstimationBlock(ParamStore& store, const std::string& name, int in_channels, int hidden, DType dt,
                  Rng& rng, double out_bias_init = 0.0);
  NodePtr forward(const NodePtr& agg) const;
  int in_channels() const { return in_channels_; }

 private:
  Conv2dLayer c0_, c1_, c2_, out_;
  int in_channels_ = 0;
};

// Encoder plus one-stage decoder. The coarsest scale regresses disparity
// directly (clamped at 0); every finer scale predicts a residual against the
// doubled upsampling of its predecessor.
class ResidualPyramid {
 public:
  ResidualPyramid() = default;
  ResidualPyramid(ParamStore& store, const std::string& name, const ResidualPyramidConfig& cfg,
                  DType dt, Rng& rng);

  EncoderState encode(const NodePtr& prior, const std::vector<NodePtr>& backbone_skips) const;

  struct ScaleRecord {
    NodePtr upsampled;  // 2 * u(d_{s+1}); undefined at the coarsest scale
    NodePtr residual;   // estimation block output
    NodePtr map;        // composed disparity
  };

  struct DecodeResult {
    std::vector<DisparityMap> maps;  // coarse to fine, scales S-1 .. 0
    std::vector<ScaleRecord> records;
  };

  // edge_feat / edge_map may be null when edge feeding is disabled. left and
  // right are the full-resolution input images used for the per-scale
  // geometrical constraints.
  DecodeResult decode(const NodePtr& prior, const std::vector<NodePtr>& backbone_skips,
                      const NodePtr& edge_feat, const NodePtr& edge_map, const NodePtr& left,
                      const NodePtr& right) const;

  const ResidualPyramidConfig& config() const { return cfg_; }
  int encoder_channels(int scale) const;

 private:
  struct EncoderLevel {
    Conv2dLayer down;    // stride 2 (stride 1 at the prior scale)
    Conv2dLayer refine;  // stride 1
  };

  ResidualPyramidConfig cfg_;
  std::vector<EncoderLevel> levels_;          // scales prior_scale .. S-1
  std::vector<EstimationBlock> est_blocks_;  // indexed by scale 0 .. S-1
};

}  // namespace edgestereo
