#pragma once

#include "edgestereo/tensor.hpp"

namespace edgestereo {

// One synthetic training pair with dense ground truth. Image tensors are
// [3,H,W] f32 in [0,1]; disparity/mask/edges are [1,H,W].
struct StereoSample {
  Tensor left, right;
  Tensor gt_disparity;  // pixels, in [0, d_max]
  Tensor valid_mask;    // 0 where the left pixel is occluded in the right view
  Tensor gt_edges;      // 1 where the disparity forward-difference magnitude > 0.5
};

struct GeneratorParams {
  int height = 32;
  int width = 64;
  int max_disparity = 8;
  int layers = 3;          // textured rectangles/ellipses over the background
  int texture_smoothing = 1;  // box-filter passes over the value noise
  bool subpixel = false;   // fractional layer disparities (integer by default)
};

// Layered random stereogram: n layers at distinct disparities over a
// background at disparity 0, nearer layers occluding farther ones in both
// views. Deterministic for a fixed seed; with integer disparities the right
// image is an exact per-layer shift of the left content, so
// warp_right_to_left(right, gt_disparity) reproduces left on the valid mask.
StereoSample generate_stereogram(std::uint64_t seed, const GeneratorParams& params);

class DataSource {
 public:
  virtual ~DataSource() = default;
  virtual std::int64_t size() const = 0;
  // Pure function of the index: repeated calls return identical samples.
  virtual StereoSample sample(std::int64_t index) const = 0;
};

class GeneratorSource final : public DataSource {
 public:
  GeneratorSource(GeneratorParams params, std::uint64_t base_seed, std::int64_t count)
      : params_(params), base_seed_(base_seed), count_(count) {}

  std::int64_t size() const override { return count_; }
  StereoSample sample(std::int64_t index) const override {
    return generate_stereogram(mix_seed(base_seed_, static_cast<std::uint64_t>(index)), params_);
  }

 private:
  GeneratorParams params_;
  std::uint64_t base_seed_;
  std::int64_t count_;
};

}  // namespace edgestereo
