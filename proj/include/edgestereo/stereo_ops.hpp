#pragma once

#include <utility>

#include "edgestereo/ops.hpp"

namespace edgestereo {

// Per-pixel matching scores over horizontal displacements 0..max_disp.
// Channel d holds the channel-normalized dot product of fl at (y,x) with fr
// at (y,x-d); positions with x-d < 0 contribute 0.
struct CostVolume {
  NodePtr scores;  // [B, max_disp+1, H, W]
  int max_disp = 0;
};

// Disparity at one pyramid scale, in pixels of its own grid.
// scale 0 is full resolution.
struct DisparityMap {
  NodePtr map;  // [B, 1, h, w]
  int scale = 0;
};

namespace ops {

CostVolume correlation1d(const NodePtr& fl, const NodePtr& fr, int max_disp);

// Samples right at (y, x - disp) with bilinear interpolation along x;
// out-of-range coordinates clamp to the image border. Differentiable in both
// the image and the disparity.
NodePtr warp_right_to_left(const NodePtr& right, const NodePtr& disp);

// Elementwise |left - synthesized|.
NodePtr error_map(const NodePtr& left, const NodePtr& synthesized);

// d_s = max(0, 2*u(coarse) + residual). Upsampled disparity values are
// doubled so a correct coarse match stays correct on the finer grid.
DisparityMap compose_disparity(const DisparityMap& coarse, const NodePtr& residual);

// Forward differences; last column / last row are 0.
NodePtr spatial_gradient_x(const NodePtr& x);
NodePtr spatial_gradient_y(const NodePtr& x);
std::pair<NodePtr, NodePtr> spatial_gradients(const NodePtr& x);

}  // namespace ops
}  // namespace edgestereo
