#include "edgestereo/autograd.hpp"

#include <thread>
#include <unordered_set>

namespace edgestereo {

namespace {
thread_local bool g_grad_enabled = true;

int env_thread_count() {
  if (const char* s = std::getenv("EDGESTEREO_THREADS")) {
    const int v = std::atoi(s);
    if (v >= 1) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}
}  // namespace

bool GradMode::enabled() { return g_grad_enabled; }
void GradMode::set_enabled(bool on) { g_grad_enabled = on; }

int worker_threads() {
  static const int n = env_thread_count();
  return n;
}

void parallel_for(std::int64_t n, const std::function<void(std::int64_t)>& fn) {
  const int threads = worker_threads();
  if (threads <= 1 || n < 2) {
    for (std::int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const int used = static_cast<int>(std::min<std::int64_t>(threads, n));
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(used));
  const std::int64_t chunk = (n + used - 1) / used;
  for (int t = 0; t < used; ++t) {
    const std::int64_t begin = t * chunk;
    const std::int64_t end = std::min<std::int64_t>(n, begin + chunk);
    pool.emplace_back([&fn, begin, end]() {
      for (std::int64_t i = begin; i < end; ++i) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

NodePtr make_op(const std::string& op, Tensor value, std::vector<NodePtr> parents,
                std::function<void(Node&)> backward_fn) {
  check(value.all_finite(), op + ": non-finite value in output");
  auto n = std::make_shared<Node>();
  n->op = op;
  n->value = std::move(value);
  if (GradMode::enabled()) {
    for (const auto& p : parents)
      if (p && p->requires_grad) {
        n->requires_grad = true;
        break;
      }
  }
  if (n->requires_grad) {
    n->parents = std::move(parents);
    n->backward_fn = std::move(backward_fn);
  }
  return n;
}

void backward(const NodePtr& root, const Tensor* seed) {
  check(root != nullptr, "backward: null root");
  check(root->requires_grad, "backward: root does not require grad");
  if (seed) {
    check(seed->same_shape(root->value), "backward: seed shape mismatch");
    root->accumulate(*seed);
  } else {
    root->accumulate(Tensor::full(root->value.shape(), 1.0, root->value.dtype()));
  }

  // Iterative post-order DFS; order holds children-before-parents, so the
  // reverse walk sees every consumer before its producers.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  struct Frame {
    Node* node;
    std::size_t next_parent;
  };
  std::vector<Frame> stack;
  stack.push_back({root.get(), 0});
  visited.insert(root.get());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_parent < f.node->parents.size()) {
      Node* p = f.node->parents[f.next_parent++].get();
      if (p && p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(f.node);
      stack.pop_back();
    }
  }

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && n->has_grad()) n->backward_fn(*n);
  }
}

}  // namespace edgestereo
