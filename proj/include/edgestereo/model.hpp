#pragma once

#include <string>
#include <vector>

#include "edgestereo/context_pyramid.hpp"
#include "edgestereo/edge_net.hpp"
#include "edgestereo/residual_pyramid.hpp"

namespace edgestereo {

struct ModelConfig {
  std::vector<int> backbone_widths = {16, 24, 32, 40, 48};  // per stage, stage 0 at full res
  int shared_stages = 3;   // stages shared between the disparity and edge branches
  int image_channels = 3;
  int side_channels = 16;  // per-side-branch edge feature depth
  int fm_channels = 128;   // mixed feature width
  std::string context_pyramid = "P-2_4_8_16";
  int branch_channels = 0;  // 0: fm_channels / 4
  int scales = 7;           // S
  int max_disp = 40;        // correlation displacement at the shared-feature resolution
  int est_hidden = 32;
  int encoder_base = 64;
  int encoder_max = 128;
  int reduce_channels = 0;  // F_r^l width; 0: same as shared feature
  bool use_edge_cues = true;

  std::string to_json() const;
  static ModelConfig from_json(const std::string& text);
  void validate() const;
  int shared_stride() const { return 1 << (shared_stages - 1); }
  // edge branch spans all five backbone stages
  int edge_stride() const { return 1 << (static_cast<int>(backbone_widths.size()) - 1); }
};

struct ParamGroup {
  std::string name;
  std::vector<NodePtr> params;
  bool frozen = false;

  void set_trainable(bool trainable) {
    frozen = !trainable;
    for (auto& p : params) p->requires_grad = trainable;
  }
};

// The full multi-task network: shared shallow backbone, edge sub-network,
// correlation + mixed feature, context pyramid and residual pyramid.
class EdgeStereoModel {
 public:
  EdgeStereoModel(ModelConfig cfg, std::uint64_t seed, DType dt = DType::F32);

  struct Output {
    std::vector<DisparityMap> maps;  // coarse to fine; maps.back() is full size
    std::vector<ResidualPyramid::ScaleRecord> records;
    EdgeOutput edge;  // empty nodes when edge cues are disabled
  };

  Output forward(const NodePtr& left, const NodePtr& right) const;

  // Edge branch only (phase 1). Requires use_edge_cues.
  EdgeOutput edge_forward(const NodePtr& left) const;

  std::vector<ParamGroup>& groups() { return groups_; }
  ParamGroup& group(const std::string& name);
  const ParamGroup* find_group(const std::string& name) const;

  // Stable construction order across all groups; defines checkpoint layout.
  std::vector<NamedParam> named_params() const;

  std::vector<NamedParam> group_named_params(const std::string& group_name) const;

  const ModelConfig& config() const { return cfg_; }
  DType dtype() const { return dtype_; }

  // Sum of absolute parameter values per group, for freeze diagnostics.
  double param_checksum(const std::string& group_name) const;

 private:
  struct Stage {
    Conv2dLayer conv0, conv1;
  };

  // Runs backbone stages [0, count) and returns each stage's output,
  // stage s at resolution 1/2^s.
  std::vector<NodePtr> run_backbone(const NodePtr& image, int count) const;

  ModelConfig cfg_;
  DType dtype_;
  ParamStore shared_store_, edge_store_, disp_store_;
  std::vector<Stage> stages_;
  EdgeSubnet edge_subnet_;
  Conv2dLayer reduce_;  // F^l -> F_r^l
  Conv2dLayer fuse_;    // 1x1 over [F_r^l, F_c (, F_e^l)] -> F_m
  ContextPyramid pyramid_;
  ResidualPyramid residual_;
  std::vector<ParamGroup> groups_;
};

}  // namespace edgestereo
