#include "edgestereo/optimizer.hpp"

#include <cmath>

namespace edgestereo {

Adam::Adam(std::vector<NamedParam> params, AdamConfig cfg) : cfg_(cfg) {
  slots_.reserve(params.size());
  for (auto& p : params) {
    Slot s;
    s.name = p.name;
    s.param = p.node;
    s.m = Tensor::zeros(p.node->value.shape(), p.node->value.dtype());
    s.v = Tensor::zeros(p.node->value.shape(), p.node->value.dtype());
    slots_.push_back(std::move(s));
  }
}

void Adam::step(double lr) {
  for (const auto& s : slots_)
    if (s.param->has_grad())
      check(s.param->grad.all_finite(), "adam: non-finite gradient for '" + s.name + "'");

  ++step_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
  for (auto& s : slots_) {
    dispatch(s.param->value.dtype(), [&]<typename T>() {
      auto w = s.param->value.data<T>();
      auto m = s.m.data<T>();
      auto v = s.v.data<T>();
      const T* g = s.param->has_grad() ? s.param->grad.data<T>().data() : nullptr;
      for (std::size_t i = 0; i < w.size(); ++i) {
        const double gi = g ? static_cast<double>(g[i]) : 0.0;
        const double mi = cfg_.beta1 * static_cast<double>(m[i]) + (1.0 - cfg_.beta1) * gi;
        const double vi = cfg_.beta2 * static_cast<double>(v[i]) + (1.0 - cfg_.beta2) * gi * gi;
        m[i] = static_cast<T>(mi);
        v[i] = static_cast<T>(vi);
        const double m_hat = mi / bc1;
        const double v_hat = vi / bc2;
        w[i] =
            static_cast<T>(static_cast<double>(w[i]) - lr * m_hat / (std::sqrt(v_hat) + cfg_.eps));
      }
    });
  }
}

void Adam::zero_grads() {
  for (auto& s : slots_) s.param->clear_grad();
}

}  // namespace edgestereo
