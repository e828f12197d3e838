#pragma once

#include <vector>

#include "edgestereo/layers.hpp"

namespace edgestereo {

struct EdgeOutput {
  NodePtr edge_map;      // [B,1,H,W], sigmoid probabilities
  NodePtr edge_feature;  // [B, 5*side_channels, H, W], concatenated branch features
  std::vector<NodePtr> side_maps;  // five per-branch probability maps, full size
};

// Five side branches tapping successive backbone depths. Each branch: two 3x3
// convolutions, an upsampling to full size, and a 1x1 convolution producing a
// per-branch edge probability map. Side maps fuse through a 1x1 convolution
// and a sigmoid into the final edge map; the upsampled branch features
// concatenate into the edge feature.
class EdgeSubnet {
 public:
  static constexpr int kSideBranches = 5;

  EdgeSubnet() = default;
  EdgeSubnet(ParamStore& store, const std::string& name, const std::vector<int>& tap_channels,
             int side_channels, DType dt, Rng& rng);

  EdgeOutput forward(const std::vector<NodePtr>& taps, int out_h, int out_w) const;

  int side_channels() const { return side_channels_; }
  int feature_channels() const { return kSideBranches * side_channels_; }

 private:
  struct SideBranch {
    Conv2dLayer conv0, conv1;  // 3x3, 3x3
    Conv2dLayer score;         // 1x1 -> 1
  };
  std::vector<SideBranch> branches_;
  Conv2dLayer fuse_;  // 1x1 over the 5 concatenated side maps
  int side_channels_ = 0;
};

}  // namespace edgestereo
