#pragma once

#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "edgestereo/tensor.hpp"

namespace edgestereo {

class Node;
using NodePtr = std::shared_ptr<Node>;

// Thread-local switch for graph recording. Inside a NoGradGuard, operators
// compute values only and keep no parents, so intermediates free as soon as
// the last reference drops.
class GradMode {
 public:
  static bool enabled();
  static void set_enabled(bool on);
};

class NoGradGuard {
 public:
  NoGradGuard() : prev_(GradMode::enabled()) { GradMode::set_enabled(false); }
  ~NoGradGuard() { GradMode::set_enabled(prev_); }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

// One differentiable computation record: a forward value plus the rule that
// maps the output gradient onto the parents' gradients. Gradients accumulate
// additively; a node with requires_grad false never allocates grad storage.
class Node {
 public:
  Tensor value;
  Tensor grad;  // empty until first accumulation
  bool requires_grad = false;
  std::vector<NodePtr> parents;
  std::function<void(Node&)> backward_fn;  // reads this->grad, feeds parents
  std::string op;

  static NodePtr leaf(Tensor v, bool requires_grad = false) {
    auto n = std::make_shared<Node>();
    n->value = std::move(v);
    n->requires_grad = requires_grad;
    n->op = "leaf";
    return n;
  }

  bool has_grad() const { return grad.defined(); }

  void accumulate(Tensor g) {
    if (!requires_grad) return;
    check(g.same_shape(value), "gradient shape " + g.shape_str() +
                                   " does not match value shape " + value.shape_str());
    if (!has_grad())
      grad = std::move(g);
    else
      grad.add_(g);
  }

  void clear_grad() { grad = Tensor(); }

  const std::vector<int>& shape() const { return value.shape(); }
  DType dtype() const { return value.dtype(); }
};

// Wires up a new graph node. requires_grad is true iff recording is enabled
// and any parent requires grad; otherwise parents and the backward rule are
// dropped. Throws if the forward value contains NaN/Inf.
NodePtr make_op(const std::string& op, Tensor value, std::vector<NodePtr> parents,
                std::function<void(Node&)> backward_fn);

// Reverse-mode sweep from root. Seeds the root gradient with ones unless a
// seed tensor is supplied. Visits nodes in reverse topological order;
// a node whose gradient never materialized (dead branch) is skipped.
void backward(const NodePtr& root, const Tensor* seed = nullptr);

}  // namespace edgestereo
