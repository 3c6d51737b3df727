#include "avq/baseline/weighted_product.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <fmt/format.h>

#include "avq/errors.hpp"

namespace avq {
namespace {

constexpr double kWeightMax = 1.5;
constexpr int kGridSteps = 150;  // 0.01 spacing
constexpr double kTieTol = 1e-14;

double require_positive(double q, const char* name) {
  if (!(q > 0.0) || !std::isfinite(q)) {
    throw DataError(fmt::format("weighted product needs positive {}, got {}", name, q));
  }
  return q;
}

double checked_log(double q, const char* name) { return std::log(require_positive(q, name)); }

class Objective {
 public:
  Objective(std::span<const double> q_a, std::span<const double> q_v, std::span<const double> mos)
      : mos_(mos.begin(), mos.end()) {
    log_a_.reserve(q_a.size());
    log_v_.reserve(q_v.size());
    for (double q : q_a) log_a_.push_back(checked_log(q, "q_a"));
    for (double q : q_v) log_v_.push_back(checked_log(q, "q_v"));
  }

  double operator()(double w_a, double w_v) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < mos_.size(); ++i) {
      const double d = std::exp(w_a * log_a_[i] + w_v * log_v_[i]) - mos_[i];
      acc += d * d;
    }
    return acc / static_cast<double>(mos_.size());
  }

 private:
  std::vector<double> log_a_, log_v_, mos_;
};

bool better(double mse, double sum, const ProductFit& best) {
  const double tol = kTieTol * std::max(1.0, best.mse);
  if (mse < best.mse - tol) return true;
  return mse <= best.mse + tol && sum < best.weights.w_a + best.weights.w_v;
}

}  // namespace

double weighted_product(double q_a, double q_v, const ProductWeights& w) {
  return std::pow(require_positive(q_a, "q_a"), w.w_a) * std::pow(require_positive(q_v, "q_v"), w.w_v);
}

double video_score_on_mos_scale(double q_v) { return 1.0 + 4.0 * q_v / 100.0; }

ProductFit optimize_product_weights(std::span<const double> q_a, std::span<const double> q_v,
                                    std::span<const double> mos) {
  if (mos.empty()) throw ContractError("optimize_product_weights: empty dataset");
  if (q_a.size() != mos.size() || q_v.size() != mos.size()) {
    throw ContractError("optimize_product_weights: score and target lengths differ");
  }
  const Objective f(q_a, q_v, mos);

  ProductFit best{{0.0, 0.0}, f(0.0, 0.0)};
  for (int i = 0; i <= kGridSteps; ++i) {
    for (int j = 0; j <= kGridSteps; ++j) {
      const double w_a = i * 0.01, w_v = j * 0.01;
      const double mse = f(w_a, w_v);
      if (better(mse, w_a + w_v, best)) best = {{w_a, w_v}, mse};
    }
  }

  // Compass search seeded at the best grid cell, halving the step on failure.
  static constexpr double kDirs[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
  for (double step = 0.005; step >= 1e-7; step *= 0.5) {
    bool improved = true;
    while (improved) {
      improved = false;
      for (const auto& d : kDirs) {
        const double w_a = std::clamp(best.weights.w_a + d[0] * step, 0.0, kWeightMax);
        const double w_v = std::clamp(best.weights.w_v + d[1] * step, 0.0, kWeightMax);
        const double mse = f(w_a, w_v);
        if (mse < best.mse - kTieTol * std::max(1.0, best.mse)) {
          best = {{w_a, w_v}, mse};
          improved = true;
        }
      }
    }
  }
  return best;
}

ProductFit optimize_product_weights(const Dataset& ds) {
  std::vector<double> q_a, q_v, mos;
  q_a.reserve(ds.size());
  q_v.reserve(ds.size());
  mos.reserve(ds.size());
  for (const auto& r : ds) {
    q_a.push_back(r.q_a);
    q_v.push_back(video_score_on_mos_scale(r.q_v));
    mos.push_back(r.mos);
  }
  return optimize_product_weights(q_a, q_v, mos);
}

double predict_product(const FeatureRecord& record, const ProductWeights& w) {
  return weighted_product(record.q_a, video_score_on_mos_scale(record.q_v), w);
}

}  // namespace avq
