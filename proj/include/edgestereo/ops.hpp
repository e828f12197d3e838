#pragma once

#include <vector>

#include "edgestereo/autograd.hpp"

namespace edgestereo::ops {

// 2-d convolution over [B,C,H,W] with weight [K,C,kh,kw] and bias [K].
// Output extent: (H + 2*pad - dilation*(kh-1) - 1)/stride + 1.
NodePtr conv2d(const NodePtr& input, const NodePtr& weight, const NodePtr& bias, int stride = 1,
               int pad = 0, int dilation = 1);

NodePtr relu(const NodePtr& x);
NodePtr sigmoid(const NodePtr& x);

// Plain average pooling, no padding, full windows only.
NodePtr avg_pool(const NodePtr& x, int kernel, int stride);

// Averages over ceil-mode windows chosen to hit the exact output size.
NodePtr adaptive_avg_pool(const NodePtr& x, int out_h, int out_w);

// Half-pixel-center (align-corners-false) sampling with edge clamp.
NodePtr bilinear_resize(const NodePtr& x, int out_h, int out_w);

NodePtr concat_channels(const std::vector<NodePtr>& xs);

NodePtr add(const NodePtr& a, const NodePtr& b);
NodePtr sub(const NodePtr& a, const NodePtr& b);
NodePtr mul(const NodePtr& a, const NodePtr& b);
NodePtr neg(const NodePtr& x);
NodePtr abs(const NodePtr& x);
NodePtr exp(const NodePtr& x);
NodePtr scale(const NodePtr& x, double s);

// Reductions to a scalar tensor of shape {1}.
NodePtr reduce_mean(const NodePtr& x);
NodePtr reduce_sum(const NodePtr& x);

}  // namespace edgestereo::ops
