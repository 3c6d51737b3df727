#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "avq/tensor/matrix.hpp"

namespace avq {

struct AdamWConfig {
  double lr = 1e-4;
  double weight_decay = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First/second moment accumulators mirroring the parameter shapes.
struct OptimizerState {
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;
  /// True while a tensor has only ever seen null gradients, so both of its
  /// moments are still exactly zero and its update reduces to the decay.
  std::vector<bool> moments_zero;
  std::uint64_t step = 0;
};

/// One AdamW update with decoupled weight decay:
///   p <- p * (1 - lr * wd);  p <- p - lr * m_hat / (sqrt(v_hat) + eps)
/// with bias-corrected moments. A null gradient pointer is a zero gradient.
/// The state is sized on first use; later shape disagreement is a ContractError.
void adamw_step(std::span<Matrix* const> params, std::span<const Matrix* const> grads,
                OptimizerState& state, const AdamWConfig& config);

}  // namespace avq
