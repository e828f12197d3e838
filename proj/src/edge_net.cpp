#include "edgestereo/edge_net.hpp"

namespace edgestereo {

EdgeSubnet::EdgeSubnet(ParamStore& store, const std::string& name,
                       const std::vector<int>& tap_channels, int side_channels, DType dt, Rng& rng)
    : side_channels_(side_channels) {
  check(tap_channels.size() == kSideBranches,
        "edge subnet: expected " + std::to_string(kSideBranches) + " tap depths, got " +
            std::to_string(tap_channels.size()));
  check(side_channels >= 1, "edge subnet: side_channels must be >= 1");
  branches_.reserve(kSideBranches);
  for (int i = 0; i < kSideBranches; ++i) {
    const std::string base = name + ".side" + std::to_string(i);
    SideBranch br;
    br.conv0 = Conv2dLayer(store, base + ".conv0", tap_channels[static_cast<std::size_t>(i)],
                           side_channels, 3, 1, 1, 1, dt, rng);
    br.conv1 = Conv2dLayer(store, base + ".conv1", side_channels, side_channels, 3, 1, 1, 1, dt, rng);
    br.score = Conv2dLayer(store, base + ".score", side_channels, 1, 1, 1, 0, 1, dt, rng);
    branches_.push_back(std::move(br));
  }
  fuse_ = Conv2dLayer(store, name + ".fuse", kSideBranches, 1, 1, 1, 0, 1, dt, rng);
}

EdgeOutput EdgeSubnet::forward(const std::vector<NodePtr>& taps, int out_h, int out_w) const {
  check(taps.size() == kSideBranches, "edge subnet: wrong tap count");
  EdgeOutput out;
  std::vector<NodePtr> feats;
  feats.reserve(kSideBranches);
  for (std::size_t i = 0; i < branches_.size(); ++i) {
    const auto& br = branches_[i];
    auto x = ops::relu(br.conv1.forward(ops::relu(br.conv0.forward(taps[i]))));
    auto feat = ops::bilinear_resize(x, out_h, out_w);
    feats.push_back(feat);
    out.side_maps.push_back(ops::sigmoid(br.score.forward(feat)));
  }
  out.edge_feature = ops::concat_channels(feats);
  out.edge_map = ops::sigmoid(fuse_.forward(ops::concat_channels(out.side_maps)));
  return out;
}

}  // namespace edgestereo
