#include "avq/importance/importance.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "avq/errors.hpp"
#include "avq/train/trainer.hpp"

namespace avq {
namespace {

double single_output(const FusionNetParams& params, const ModelInput& stimulus, const ForwardOptions& options) {
  const std::vector<double> out = predict(params, stimulus, options);
  if (out.size() != 1) {
    throw ContractError("importance measures take a single stimulus, got " + std::to_string(out.size()));
  }
  return out[0];
}

struct Span {
  double lo;
  double hi;
};

Span pooled_range(std::span<const RawImportance> raw, bool ablation) {
  Span s{INFINITY, -INFINITY};
  for (const auto& r : raw) {
    for (double v : ablation ? r.ablation : r.change_norm) {
      s.lo = std::min(s.lo, v);
      s.hi = std::max(s.hi, v);
    }
  }
  return s;
}

}  // namespace

std::string_view to_string(Modality m) { return m == Modality::audio ? "audio" : "video"; }

double ablation_sensitivity(const FusionNetParams& params, const ModelInput& stimulus, Modality m) {
  const double full = single_output(params, stimulus, {});
  ForwardOptions masked;
  masked.mask_audio = m == Modality::audio;
  masked.mask_video = m == Modality::video;
  const double ablated = single_output(params, stimulus, masked);
  const double diff = std::abs(full - ablated);
  if (full == 0.0) {
    throw NumericError(fmt::format("ablation sensitivity undefined for zero output; raw difference {}", diff));
  }
  return diff / std::abs(full);
}

double feature_change_norm(const FusionNetParams& params, const ModelInput& stimulus, Modality m) {
  Tape tape;
  const BoundParams bound = bind(tape, params);
  const ForwardTrace tr = forward(tape, bound, params.config, stimulus, {});
  const Matrix& pre = (m == Modality::audio ? tr.audio_pre : tr.video_pre).value();
  const Matrix& post = (m == Modality::audio ? tr.audio_post : tr.video_post).value();
  const double base = frobenius_norm(pre);
  if (base == 0.0) {
    throw NumericError(fmt::format("feature change norm undefined: {} embedding is zero", to_string(m)));
  }
  return frobenius_norm(pre - post) / base;
}

void ImportanceWeights::validate() const {
  if (!(alpha > beta) || beta < 0.0 || std::abs(alpha + beta - 1.0) > 1e-12) {
    throw ConfigError(fmt::format("importance weights need alpha > beta >= 0 and alpha + beta = 1, got {} / {}",
                                  alpha, beta));
  }
}

std::vector<ImportanceReport> final_importance(std::span<const RawImportance> raw, const ImportanceWeights& w) {
  w.validate();
  if (raw.size() < 2) throw DataError("final importance needs a corpus of at least 2 records");
  const Span abl = pooled_range(raw, true);
  const Span chg = pooled_range(raw, false);
  if (abl.hi == abl.lo) spdlog::warn("importance: ablation sensitivity constant over corpus; normalized to 0.5");
  if (chg.hi == chg.lo) spdlog::warn("importance: feature change norm constant over corpus; normalized to 0.5");
  auto norm = [](const Span& s, double v) { return s.hi == s.lo ? 0.5 : (v - s.lo) / (s.hi - s.lo); };

  std::vector<ImportanceReport> out;
  out.reserve(raw.size());
  for (const auto& r : raw) {
    ImportanceReport rep;
    rep.stimulus_id = r.stimulus_id;
    rep.i_abl = r.ablation;
    rep.i_norm = r.change_norm;
    for (std::size_t m = 0; m < 2; ++m) {
      const double v = w.alpha * norm(abl, r.ablation[m]) + w.beta * (1.0 - norm(chg, r.change_norm[m]));
      rep.i_final[m] = std::clamp(v, 0.0, 1.0);
    }
    out.push_back(std::move(rep));
  }
  return out;
}

std::vector<RawImportance> raw_importance(const FusionNetParams& params, const Dataset& standardized) {
  const TrainingSet set = to_training_set(standardized);
  std::vector<RawImportance> out;
  out.reserve(standardized.size());
  for (std::size_t i = 0; i < standardized.size(); ++i) {
    const std::size_t idx[] = {i};
    const ModelInput stimulus = set.gather(idx).input;
    RawImportance r;
    r.stimulus_id = standardized[i].stimulus_id;
    for (Modality m : {Modality::audio, Modality::video}) {
      r.ablation[static_cast<std::size_t>(m)] = ablation_sensitivity(params, stimulus, m);
      r.change_norm[static_cast<std::size_t>(m)] = feature_change_norm(params, stimulus, m);
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<ImportanceReport> explain(const FusionNetParams& params, const Dataset& standardized,
                                      const ImportanceWeights& w) {
  const auto raw = raw_importance(params, standardized);
  return final_importance(raw, w);
}

std::array<double, 2> mean_final_importance(std::span<const ImportanceReport> reports) {
  std::array<double, 2> mean{};
  if (reports.empty()) return mean;
  for (const auto& r : reports) {
    mean[0] += r.i_final[0];
    mean[1] += r.i_final[1];
  }
  for (double& v : mean) v /= static_cast<double>(reports.size());
  return mean;
}

void write_importance_csv(std::span<const ImportanceReport> reports, std::ostream& out) {
  out << "stimulus_id,i_abl_audio,i_abl_video,i_norm_audio,i_norm_video,i_final_audio,i_final_video\n";
  for (const auto& r : reports) {
    out << fmt::format("{},{},{},{},{},{},{}\n", r.stimulus_id, r.i_abl[0], r.i_abl[1], r.i_norm[0], r.i_norm[1],
                       r.i_final[0], r.i_final[1]);
  }
}

}  // namespace avq
