#include "sgmi/autodiff/adam.hpp"

#include <cmath>

#include "sgmi/core/log.hpp"

namespace sgmi::ad {

bool adam_step(ParameterStore& store, AdamState& state) {
  bool any_ready = false;
  for (const auto& p : store) any_ready = any_ready || p.grad_ready;
  if (!any_ready) {
    log_warning("adam_step called before any backward pass; skipping update");
    return false;
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);

  for (auto& p : store) {
    auto [mit, m_new] = state.m.try_emplace(p.name, p.value.shape());
    auto [vit, v_new] = state.v.try_emplace(p.name, p.value.shape());
    auto m = mit->second.data();
    auto v = vit->second.data();
    auto w = p.value.data();
    auto g = p.grad.data();
    for (std::size_t k = 0; k < w.size(); ++k) {
      m[k] = state.beta1 * m[k] + (1.0 - state.beta1) * g[k];
      v[k] = state.beta2 * v[k] + (1.0 - state.beta2) * g[k] * g[k];
      const double m_hat = m[k] / c1;
      const double v_hat = v[k] / c2;
      w[k] -= state.lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
  store.zero_grad();
  return true;
}

}  // namespace sgmi::ad
