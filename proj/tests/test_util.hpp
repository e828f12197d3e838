#pragma once

#include <vector>

#include "edgestereo/tensor.hpp"

namespace edgestereo::testing {

inline Tensor rand_tensor(std::vector<int> shape, Rng& rng, double lo = -1.0, double hi = 1.0,
                          DType dt = DType::F64) {
  Tensor t(std::move(shape), dt);
  for (std::int64_t i = 0; i < t.numel(); ++i) t.set(i, rng.uniform(lo, hi));
  return t;
}

// Keeps every coordinate at least `margin` away from zero (for subgradient
// points of relu/abs) or from integer values (for warp sampling boundaries).
inline Tensor rand_tensor_off_zero(std::vector<int> shape, Rng& rng, double margin,
                                   DType dt = DType::F64) {
  Tensor t(std::move(shape), dt);
  for (std::int64_t i = 0; i < t.numel(); ++i) {
    double v = rng.uniform(margin, 1.0);
    if (rng.uniform() < 0.5) v = -v;
    t.set(i, v);
  }
  return t;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (std::int64_t i = 0; i < a.numel(); ++i)
    m = std::max(m, std::fabs(a.get(i) - b.get(i)));
  return m;
}

}  // namespace edgestereo::testing
