#pragma once

#include <span>
#include <vector>

#include "avq/tensor/tape.hpp"

namespace avq {

/// Concordance correlation coefficient
///   2 cov(x, y) / (var x + var y + (mean x - mean y)^2)
/// with population moments. Both inputs constant: defined as 0 (warning logged).
/// ContractError on length mismatch or n < 2.
double ccc(std::span<const double> pred, std::span<const double> target);

struct LossParts {
  double loss = 0.0;
  double ccc = 0.0;
  double rmse = 0.0;
};

/// lambda * (1 - CCC) + (1 - lambda) * RMSE. ConfigError unless lambda in [0, 1].
LossParts composite_loss(std::span<const double> pred, std::span<const double> target, double lambda);

/// Differentiable form over a [B x 1] prediction node. Returns a 1x1 node.
Var composite_loss(Var pred, std::span<const double> target, double lambda);

}  // namespace avq
