#pragma once

#include <array>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "avq/data/dataset.hpp"
#include "avq/model/fusion_net.hpp"

namespace avq {

enum class Modality { audio = 0, video = 1 };

std::string_view to_string(Modality m);

/// |f(x) - f(x \ m)| / |f(x)| for a single stimulus, where f(x \ m) zeroes the
/// modality's 512-dim embedding as it enters fusion (X_a, or the projected X_v').
/// NumericError carrying the raw difference when f(x) == 0.
double ablation_sensitivity(const FusionNetParams& params, const ModelInput& stimulus, Modality m);

/// ||phi_pre - phi_post|| / ||phi_pre|| with phi_pre the modality's embedding
/// entering cross-attention and phi_post its cross-attended output.
/// NumericError when ||phi_pre|| == 0.
double feature_change_norm(const FusionNetParams& params, const ModelInput& stimulus, Modality m);

/// Raw measures for one stimulus, indexed by Modality.
struct RawImportance {
  std::string stimulus_id;
  std::array<double, 2> ablation{};
  std::array<double, 2> change_norm{};
};

struct ImportanceReport {
  std::string stimulus_id;
  std::array<double, 2> i_abl{};
  std::array<double, 2> i_norm{};
  std::array<double, 2> i_final{};
};

struct ImportanceWeights {
  double alpha = 0.7;
  double beta = 0.3;
  /// ConfigError unless alpha > beta >= 0 and alpha + beta == 1.
  void validate() const;
};

/// i_final = alpha * norm(i_abl) + beta * (1 - norm(i_norm)). Each raw measure
/// is min-max normalized over the whole corpus, pooling both modalities, so
/// audio and video scores share one scale. A measure that is constant over the
/// corpus normalizes to 0.5 (warning logged). Needs >= 2 records.
std::vector<ImportanceReport> final_importance(std::span<const RawImportance> raw, const ImportanceWeights& w);

/// Raw measures for every record of a standardized dataset.
std::vector<RawImportance> raw_importance(const FusionNetParams& params, const Dataset& standardized);

std::vector<ImportanceReport> explain(const FusionNetParams& params, const Dataset& standardized,
                                      const ImportanceWeights& w);

/// Mean i_final per modality.
std::array<double, 2> mean_final_importance(std::span<const ImportanceReport> reports);

/// stimulus_id,i_abl_audio,i_abl_video,i_norm_audio,i_norm_video,i_final_audio,i_final_video
void write_importance_csv(std::span<const ImportanceReport> reports, std::ostream& out);

}  // namespace avq
