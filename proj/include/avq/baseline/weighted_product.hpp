#pragma once

#include <span>

#include "avq/data/dataset.hpp"

namespace avq {

struct ProductWeights {
  double w_a = 0.0;
  double w_v = 0.0;
};

/// q_a^w_a * q_v^w_v. Both scores must be positive (DataError otherwise).
double weighted_product(double q_a, double q_v, const ProductWeights& w);

struct ProductFit {
  ProductWeights weights;
  double mse = 0.0;  // objective at `weights`
};

/// Minimizes the mean squared error of weighted_product(q_a, q_v) against
/// `mos` over w_a, w_v in [0, 1.5]: exhaustive 0.01 grid, then a pattern search
/// refining the best cell. Ties go to the smaller w_a + w_v.
/// ContractError on empty or mismatched input; DataError on non-positive scores.
ProductFit optimize_product_weights(std::span<const double> q_a, std::span<const double> q_v,
                                    std::span<const double> mos);

/// Dataset form: q_v is mapped from [0, 100] onto [1, 5] so both scores share
/// the 5-point MOS scale.
ProductFit optimize_product_weights(const Dataset& ds);

/// Product prediction for a raw record, same scale mapping as above.
double predict_product(const FeatureRecord& record, const ProductWeights& w);

/// 1 + 4 * q_v / 100.
double video_score_on_mos_scale(double q_v);

}  // namespace avq
