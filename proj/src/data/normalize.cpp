#include <algorithm>
#include <cmath>

#include <spdlog/spdlog.h>

#include "avq/data/dataset.hpp"
#include "avq/errors.hpp"

namespace avq {

FeatureStats fit_standard_stats(const Dataset& ds) {
  if (ds.size() < 2) throw DataError("standardize needs at least 2 records, got " + std::to_string(ds.size()));
  FeatureStats stats;
  stats.kind = NormKind::standard;
  stats.center.assign(kFeatureDim, 0.0);
  stats.spread.assign(kFeatureDim, 0.0);
  const double n = static_cast<double>(ds.size());
  for (const auto& r : ds)
    for (std::size_t d = 0; d < kFeatureDim; ++d) stats.center[d] += r.feature(d);
  for (double& m : stats.center) m /= n;
  for (const auto& r : ds) {
    for (std::size_t d = 0; d < kFeatureDim; ++d) {
      const double e = r.feature(d) - stats.center[d];
      stats.spread[d] += e * e;
    }
  }
  for (std::size_t d = 0; d < kFeatureDim; ++d) {
    stats.spread[d] = std::sqrt(stats.spread[d] / n);
    if (stats.spread[d] == 0.0) {
      stats.spread[d] = 1.0;
      stats.degenerate.push_back(d);
    }
  }
  if (!stats.degenerate.empty()) {
    spdlog::warn("standardize: {} zero-variance feature dimension(s); using std 1 (first: {})",
                 stats.degenerate.size(), stats.degenerate.front());
  }
  return stats;
}

FeatureStats fit_minmax_stats(const Dataset& ds) {
  if (ds.empty()) throw DataError("min-max normalization needs at least 1 record");
  FeatureStats stats;
  stats.kind = NormKind::minmax;
  stats.center.assign(kFeatureDim, 0.0);
  stats.spread.assign(kFeatureDim, 0.0);
  for (std::size_t d = 0; d < kFeatureDim; ++d) {
    double lo = ds[0].feature(d);
    double hi = lo;
    for (const auto& r : ds) {
      lo = std::min(lo, r.feature(d));
      hi = std::max(hi, r.feature(d));
    }
    stats.center[d] = lo;
    stats.spread[d] = hi - lo;
    if (stats.spread[d] == 0.0) stats.degenerate.push_back(d);
  }
  if (!stats.degenerate.empty()) {
    spdlog::warn("minmax_normalize: {} constant feature dimension(s) mapped to 0 (first: {})",
                 stats.degenerate.size(), stats.degenerate.front());
  }
  return stats;
}

Dataset apply_stats(const Dataset& ds, const FeatureStats& stats) {
  std::vector<FeatureRecord> out;
  out.reserve(ds.size());
  for (const auto& r : ds) out.push_back(stats.apply(r));
  return Dataset(std::move(out), stats);
}

Normalized standardize(const Dataset& ds) {
  FeatureStats stats = fit_standard_stats(ds);
  return {apply_stats(ds, stats), stats};
}

Normalized minmax_normalize(const Dataset& ds) {
  FeatureStats stats = fit_minmax_stats(ds);
  return {apply_stats(ds, stats), stats};
}

}  // namespace avq
