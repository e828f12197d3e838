#pragma once

#include <string>
#include <utility>
#include <vector>

#include "edgestereo/ops.hpp"

namespace edgestereo {

// Named parameter leaf. Collection order is construction order and defines
// the checkpoint layout.
struct NamedParam {
  std::string name;
  NodePtr node;
};

class ParamStore {
 public:
  NodePtr create(const std::string& name, Tensor init) {
    auto n = Node::leaf(std::move(init), true);
    params_.push_back({name, n});
    return n;
  }

  const std::vector<NamedParam>& params() const { return params_; }

 private:
  std::vector<NamedParam> params_;
};

// Fan-in-scaled uniform weights, zero bias. The sqrt(6/fan_in) bound keeps
// activation magnitudes stable through deep ReLU stacks.
inline Tensor conv_weight_init(int out_ch, int in_ch, int kh, int kw, DType dt, Rng& rng) {
  Tensor w({out_ch, in_ch, kh, kw}, dt);
  const double bound = std::sqrt(6.0 / (static_cast<double>(in_ch) * kh * kw));
  for (std::int64_t i = 0; i < w.numel(); ++i) w.set(i, rng.uniform(-bound, bound));
  return w;
}

struct Conv2dLayer {
  NodePtr weight, bias;
  int stride = 1, pad = 0, dilation = 1;

  Conv2dLayer() = default;

  Conv2dLayer(ParamStore& store, const std::string& name, int in_ch, int out_ch, int k, int stride,
              int pad, int dilation, DType dt, Rng& rng)
      : stride(stride), pad(pad), dilation(dilation) {
    weight = store.create(name + ".weight", conv_weight_init(out_ch, in_ch, k, k, dt, rng));
    bias = store.create(name + ".bias", Tensor::zeros({out_ch}, dt));
  }

  NodePtr forward(const NodePtr& x) const {
    return ops::conv2d(x, weight, bias, stride, pad, dilation);
  }
};

}  // namespace edgestereo
