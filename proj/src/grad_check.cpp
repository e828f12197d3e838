#include "edgestereo/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace edgestereo {

double grad_check(const ScalarFn& f, const std::vector<Tensor>& inputs, double eps) {
  check(eps >= 1e-7 && eps <= 1e-3, "grad_check: eps out of [1e-7, 1e-3]");
  check(!inputs.empty(), "grad_check: no inputs");
  for (const auto& t : inputs)
    check(t.dtype() == DType::F64, "grad_check: inputs must be f64");

  std::vector<NodePtr> leaves;
  leaves.reserve(inputs.size());
  for (const auto& t : inputs) leaves.push_back(Node::leaf(t, true));

  NodePtr y = f(leaves);
  check(y->value.numel() == 1, "grad_check: f must be scalar-valued");
  backward(y);

  std::vector<Tensor> analytic;
  analytic.reserve(leaves.size());
  for (const auto& l : leaves)
    analytic.push_back(l->has_grad() ? l->grad : Tensor::zeros(l->value.shape(), DType::F64));

  const auto eval = [&](const std::vector<Tensor>& pts) {
    NoGradGuard ng;
    std::vector<NodePtr> ls;
    ls.reserve(pts.size());
    for (const auto& t : pts) ls.push_back(Node::leaf(t, false));
    return f(ls)->value.get(0);
  };

  double max_err = 0.0;
  std::vector<Tensor> probe = inputs;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    for (std::int64_t j = 0; j < inputs[i].numel(); ++j) {
      const double orig = inputs[i].get(j);
      probe[i].set(j, orig + eps);
      const double fp = eval(probe);
      probe[i].set(j, orig - eps);
      const double fm = eval(probe);
      probe[i].set(j, orig);
      const double numeric = (fp - fm) / (2.0 * eps);
      const double a = analytic[i].get(j);
      const double err = std::fabs(a - numeric) / std::max({std::fabs(a), std::fabs(numeric), 1e-8});
      max_err = std::max(max_err, err);
    }
  }
  return max_err;
}

double grad_check_leaves(const std::function<NodePtr()>& objective,
                         const std::vector<NodePtr>& leaves, double eps) {
  check(eps >= 1e-7 && eps <= 1e-3, "grad_check: eps out of [1e-7, 1e-3]");
  check(!leaves.empty(), "grad_check: no leaves");
  for (const auto& l : leaves) {
    check(l->value.dtype() == DType::F64, "grad_check: leaves must be f64");
    check(l->requires_grad, "grad_check: leaves must require grad");
    l->clear_grad();
  }

  NodePtr y = objective();
  check(y->value.numel() == 1, "grad_check: objective must be scalar-valued");
  backward(y);
  std::vector<Tensor> analytic;
  analytic.reserve(leaves.size());
  for (const auto& l : leaves) {
    analytic.push_back(l->has_grad() ? l->grad : Tensor::zeros(l->value.shape(), DType::F64));
    l->clear_grad();
  }

  const auto eval = [&objective]() {
    NoGradGuard ng;
    return objective()->value.get(0);
  };

  double max_err = 0.0;
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    Tensor& v = leaves[i]->value;
    for (std::int64_t j = 0; j < v.numel(); ++j) {
      const double orig = v.get(j);
      v.set(j, orig + eps);
      const double fp = eval();
      v.set(j, orig - eps);
      const double fm = eval();
      v.set(j, orig);
      const double numeric = (fp - fm) / (2.0 * eps);
      const double a = analytic[i].get(j);
      const double err = std::fabs(a - numeric) / std::max({std::fabs(a), std::fabs(numeric), 1e-8});
      max_err = std::max(max_err, err);
    }
  }
  return max_err;
}

}  // namespace edgestereo
