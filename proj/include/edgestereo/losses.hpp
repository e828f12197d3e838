#pragma once

#include <map>
#include <utility>
#include <vector>

#include "edgestereo/stereo_ops.hpp"

namespace edgestereo {

// Mean absolute disparity error over valid pixels. gt and valid_mask are
// constants; the gradient flows into d only.
NodePtr regression_loss(const NodePtr& d, const Tensor& gt, const Tensor& valid_mask);

// (1/N) sum |dx d| exp(-|dx E|) + |dy d| exp(-|dy E|). The edge map is a
// constant: no gradient reaches the edge branch through this term.
NodePtr edge_aware_smoothness(const NodePtr& d, const Tensor& edge_map);

// Class-balanced binary cross entropy with beta = |negatives| / |all|
// computed over the non-ignored pixels of the batch. Probabilities are
// clamped to [1e-7, 1 - 1e-7] inside the log.
NodePtr class_balanced_bce(const NodePtr& pred, const Tensor& label, const Tensor* ignore_mask = nullptr);

// One octave of ground-truth reduction: 2x2 average pooling with disparity
// values halved, a pooled pixel valid only when all four contributors are.
std::pair<Tensor, Tensor> downsample_gt(const Tensor& gt, const Tensor& valid);

struct LossBreakdown {
  std::vector<double> regression;  // per scale, coarse to fine
  std::vector<double> smoothness;  // 0 when the term is inactive
  std::vector<double> per_scale;   // C_s = regression + lambda_ds * smoothness
  double lambda_ds = 0.0;
  double total_value = 0.0;
  NodePtr total;  // differentiable sum over scales
};

// Deep supervision across scales. maps are ordered coarse to fine; gt, valid
// and edge_map are full resolution. Phase 2 adds lambda_ds * smoothness per
// scale with the edge map resized to that scale; phase 3 is regression only.
LossBreakdown deep_supervision(const std::vector<DisparityMap>& maps, const Tensor& gt_full,
                               const Tensor& valid_full, const Tensor& edge_map, double lambda_ds,
                               int phase);

struct EvalReport {
  double epe = 0.0;
  std::map<double, double> bad;  // threshold -> fraction of valid pixels
  std::int64_t valid_count = 0;
};

EvalReport evaluate(const Tensor& pred, const Tensor& gt, const Tensor& valid_mask,
                    const std::vector<double>& thresholds = {1.0, 3.0, 5.0});

}  // namespace edgestereo
