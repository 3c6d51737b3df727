#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <json.hpp>

#include "avq/data/dataset.hpp"

namespace avq {

/// Product-moment correlation. ContractError on length mismatch or n < 2;
/// NumericError when either input is constant (correlation undefined).
double pearson(std::span<const double> x, std::span<const double> y);

/// 1-based ranks; tied values share the mean of the ranks they span.
std::vector<double> average_ranks(std::span<const double> x);

/// Pearson correlation of average ranks.
double spearman(std::span<const double> x, std::span<const double> y);

/// sqrt(mean((x - y)^2)). ContractError on length mismatch or empty input.
double rmse(std::span<const double> x, std::span<const double> y);

struct EvalReport {
  double r_p = 0.0;
  double r_s = 0.0;
  double rmse = 0.0;
  std::size_t n = 0;
  Scale scale = Scale::mos5;
};

EvalReport evaluate(std::span<const double> pred, std::span<const double> target, Scale scale);

/// {r_p, r_s, rmse, n, scale}
nlohmann::json to_json(const EvalReport& report);

}  // namespace avq
