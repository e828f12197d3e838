#pragma once

#include <functional>
#include <string>
#include <vector>

#include "edgestereo/autograd.hpp"

namespace edgestereo {

using ScalarFn = std::function<NodePtr(const std::vector<NodePtr>&)>;

// Compares reverse-mode gradients against central differences. Inputs must be
// f64; finite differences are unreliable at 32-bit. Returns the max over all
// input coordinates of |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
double grad_check(const ScalarFn& f, const std::vector<Tensor>& inputs, double eps = 1e-5);

// Same comparison for an objective over existing graph leaves (e.g. the
// parameters of a built sub-network): perturbs each leaf's value in place and
// rebuilds the objective per evaluation.
double grad_check_leaves(const std::function<NodePtr()>& objective,
                         const std::vector<NodePtr>& leaves, double eps = 1e-5);

struct GradCheckResult {
  std::string name;
  double max_rel_error = 0.0;
  int instances = 0;
};

// Runs every registered operator through grad_check on randomized small
// instances. Deterministic for a fixed seed.
std::vector<GradCheckResult> grad_check_suite(std::uint64_t seed = 20240211);

constexpr double kGradCheckTolerance = 1e-4;

}  // namespace edgestereo
