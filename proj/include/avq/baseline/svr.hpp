#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "avq/data/dataset.hpp"
#include "avq/tensor/matrix.hpp"

namespace avq {

/// Input columns for SVR fusion. Video bitrate is never used.
///   2F: q_a, q_v            3F: + audio bitrate
///   7F: q_a, 6 VMAF features  8F: + audio bitrate
enum class SvrFeatureSet { f2, f3, f7, f8 };

SvrFeatureSet parse_svr_features(std::string_view label);
std::string_view to_string(SvrFeatureSet s);
std::size_t feature_count(SvrFeatureSet s);
/// Raw (unnormalized) columns of `record`. DataError on non-finite values.
std::vector<double> svr_features(const FeatureRecord& record, SvrFeatureSet s);

struct SvrParams {
  double C = 1.0;
  double gamma = 1.0;
  double epsilon = 0.1;
  void validate() const;  // ConfigError unless all > 0 (epsilon >= 0)
};

struct SvrSolverOptions {
  double tolerance = 1e-3;
  std::size_t max_iterations = 100000;
};

double rbf_kernel(std::span<const double> a, std::span<const double> b, double gamma);

struct SvrModel {
  SvrFeatureSet features = SvrFeatureSet::f2;
  SvrParams params;
  /// Min-max statistics of the training columns: x' = (x - lo) / span, span 0 maps to 0.
  std::vector<double> lo;
  std::vector<double> span;
  Matrix support;            // [n_sv x d], normalized
  std::vector<double> coef;  // alpha_i - alpha_i*, one per support row
  double bias = 0.0;

  std::vector<double> normalize(std::span<const double> raw) const;
};

/// sum_i coef_i K(sv_i, x) + bias for an already-normalized x.
double svr_decision(const SvrModel& model, std::span<const double> x);
double svr_predict(const SvrModel& model, const FeatureRecord& record);
std::vector<double> svr_predict(const SvrModel& model, const Dataset& ds);

struct SvrFit {
  SvrModel model;
  /// Dual variables over every training sample, in input order.
  std::vector<double> alpha;
  std::vector<double> alpha_star;
  std::size_t iterations = 0;
  /// Maximal KKT violation (m(alpha) - M(alpha)) at termination.
  double violation = 0.0;
};

/// epsilon-SVR dual on normalized rows of `x`, solved by SMO with second-order
/// working-set selection. NumericError when the iteration cap is hit.
SvrFit svr_fit_normalized(const Matrix& x, std::span<const double> y, const SvrParams& params,
                          const SvrSolverOptions& options = {});

/// Fits min-max statistics on `train`, then the dual. Targets are the MOS values.
SvrFit svr_fit(const Dataset& train, SvrFeatureSet features, const SvrParams& params,
               const SvrSolverOptions& options = {});

struct SvrGridCell {
  double C;
  double gamma;
  double val_rmse;
};

struct SvrGridResult {
  SvrParams best;
  std::vector<SvrGridCell> cells;  // row-major over (C, gamma)
};

/// Chooses (C, gamma) by validation RMSE; the first cell in row-major order wins ties.
SvrGridResult svr_grid_search(const Dataset& train, const Dataset& validation, SvrFeatureSet features,
                              std::span<const double> Cs, std::span<const double> gammas, double epsilon,
                              const SvrSolverOptions& options = {});

nlohmann::json to_json(const SvrModel& model);
SvrModel svr_model_from_json(const nlohmann::json& j);
void save_svr_model(const SvrModel& model, const std::filesystem::path& path);
SvrModel load_svr_model(const std::filesystem::path& path);

}  // namespace avq
