#pragma once

#include <array>
#include <string>

#include "edgestereo/layers.hpp"

namespace edgestereo {

enum class PyramidKind { Convolution, Pooling, Dilation };

// Parsed form of the string notation, e.g. "C-7_5_3_1", "P-1_2_4_8",
// "D-6_3_2_1". Always four branches; parameters ordered so the largest
// context scale comes first (biggest kernel / smallest pooled size / biggest
// rate).
struct ContextPyramidConfig {
  PyramidKind kind = PyramidKind::Pooling;
  std::array<int, 4> branch_params{1, 2, 4, 8};
  int branch_channels = 0;  // 0: default to input channels / 4

  static ContextPyramidConfig parse(const std::string& notation, int branch_channels = 0);
  std::string notation() const;
};

// Four parallel branches over the mixed feature; their outputs and the input
// concatenate into the hierarchical scene prior.
class ContextPyramid {
 public:
  ContextPyramid() = default;
  ContextPyramid(ParamStore& store, const std::string& name, const ContextPyramidConfig& cfg,
                 int in_channels, DType dt, Rng& rng);

  // [fm, branch0..branch3] along channels; spatial extents preserved.
  NodePtr scene_prior(const NodePtr& fm) const;

  NodePtr branch_forward(int index, const NodePtr& fm) const;

  int out_channels() const { return in_channels_ + 4 * branch_channels_; }
  int branch_channels() const { return branch_channels_; }
  const ContextPyramidConfig& config() const { return cfg_; }

 private:
  struct Branch {
    Conv2dLayer conv_a;  // C: first kxk; P: 1x1 after pool; D: 3x3 dilated
    Conv2dLayer conv_b;  // C: second kxk; D: 1x1 reduce; unused for P
    int param = 0;
  };

  ContextPyramidConfig cfg_;
  int in_channels_ = 0;
  int branch_channels_ = 0;
  std::array<Branch, 4> branches_;
};

}  // namespace edgestereo
