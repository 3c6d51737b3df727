#include "avq/train/adamw.hpp"

#include <cmath>
#include <string>

#include "avq/errors.hpp"

namespace avq {

void adamw_step(std::span<Matrix* const> params, std::span<const Matrix* const> grads,
                OptimizerState& state, const AdamWConfig& config) {
  if (params.size() != grads.size()) {
    throw ContractError("adamw_step: " + std::to_string(params.size()) + " parameters but " +
                        std::to_string(grads.size()) + " gradients");
  }
  if (state.first_moment.empty() && state.step == 0) {
    for (const Matrix* p : params) {
      state.first_moment.emplace_back(p->rows(), p->cols());
      state.second_moment.emplace_back(p->rows(), p->cols());
    }
    state.moments_zero.assign(params.size(), true);
  }
  if (state.first_moment.size() != params.size()) {
    throw ContractError("adamw_step: optimizer state tracks " + std::to_string(state.first_moment.size()) +
                        " tensors, got " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!state.first_moment[i].same_shape(*params[i]) ||
        (grads[i] != nullptr && !grads[i]->same_shape(*params[i]))) {
      throw ContractError("adamw_step: shape mismatch for tensor " + std::to_string(i) + " " +
                          params[i]->shape());
    }
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(config.beta1, t);
  const double bc2 = 1.0 - std::pow(config.beta2, t);
  const double decay = 1.0 - config.lr * config.weight_decay;
  const double b1 = config.beta1;
  const double b2 = config.beta2;

  for (std::size_t i = 0; i < params.size(); ++i) {
    double* p = params[i]->data().data();
    const std::size_t n = params[i]->size();
    if (grads[i] == nullptr && state.moments_zero[i]) {
      // m = v = 0 stay zero, so the Adam term is exactly 0.
      for (std::size_t k = 0; k < n; ++k) p[k] *= decay;
      continue;
    }
    state.moments_zero[i] = false;
    double* m = state.first_moment[i].data().data();
    double* v = state.second_moment[i].data().data();
    const double* g = grads[i] ? grads[i]->data().data() : nullptr;
    for (std::size_t k = 0; k < n; ++k) {
      const double gk = g ? g[k] : 0.0;
      m[k] = b1 * m[k] + (1.0 - b1) * gk;
      v[k] = b2 * v[k] + (1.0 - b2) * gk * gk;
      const double m_hat = m[k] / bc1;
      const double v_hat = v[k] / bc2;
      p[k] = p[k] * decay - config.lr * m_hat / (std::sqrt(v_hat) + config.eps);
    }
  }
}

}  // namespace avq
