#include "actlab/adam.hpp"

#include <cmath>

#include "actlab/error.hpp"

namespace actlab {

double clip_grad_norm(FlatParams& grad, double max_norm) {
  const double n = norm(grad);
  if (max_norm > 0.0 && n > max_norm) {
    const double scale = max_norm / (n + 1e-6);
    for (double& g : grad.data) g *= scale;
  }
  return n;
}

void adam_step(FlatParams& params, FlatParams grad, AdamState& state, double lr,
               double max_grad_norm, const AdamConfig& cfg) {
  if (grad.size() != params.size()) throw ConfigError("adam_step: gradient size mismatch");
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  if (state.m.size() != params.size() || state.v.size() != params.size())
    throw ConfigError("adam_step: optimizer state size mismatch");
  clip_grad_norm(grad, max_grad_norm);
  state.t += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grad.data[i];
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    params.data[i] -= lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
  }
}

}  // namespace actlab
