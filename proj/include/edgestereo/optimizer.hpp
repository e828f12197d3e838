#pragma once

#include <string>
#include <vector>

#include "edgestereo/layers.hpp"

namespace edgestereo {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam over an explicit trainable set. Moments exist only for
// the parameters handed in; frozen groups are simply not part of the set.
class Adam {
 public:
  struct Slot {
    std::string name;
    NodePtr param;
    Tensor m, v;
  };

  explicit Adam(std::vector<NamedParam> params, AdamConfig cfg = {});

  // One update from the gradients currently accumulated on the parameters.
  // A parameter without a gradient contributes zero. Throws on non-finite
  // gradients, leaving all parameters untouched.
  void step(double lr);

  void zero_grads();

  std::int64_t step_count() const { return step_; }
  void set_step_count(std::int64_t t) { step_ = t; }
  std::vector<Slot>& slots() { return slots_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  std::vector<Slot> slots_;
  AdamConfig cfg_;
  std::int64_t step_ = 0;
};

}  // namespace edgestereo
