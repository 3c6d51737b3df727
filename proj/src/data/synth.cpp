#include "avq/data/synth.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "avq/errors.hpp"
#include "avq/tensor/rng.hpp"

namespace avq {
namespace {

// Stream keys for Rng::split.
constexpr std::uint64_t kClipStream = 1;
constexpr std::uint64_t kDirectionStream = 2;
constexpr std::uint64_t kStimulusStream = 3;

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::vector<double> planted_direction(std::uint64_t seed) {
  Rng rng = Rng(seed).split(kDirectionStream);
  std::vector<double> u(kAudioDim);
  double norm = 0.0;
  for (double& v : u) {
    v = rng.normal();
    norm += v * v;
  }
  norm = std::sqrt(norm);
  for (double& v : u) v /= norm;
  return u;
}

struct ClipTraits {
  double audio_mid;  // log2 kbps at half quality
  double video_mid;  // log2 Mb/s at half quality
  double motion;
  std::vector<double> audio_content;
};

void validate(const SynthSpec& spec) {
  if (spec.n_clips == 0 || spec.audio_ladder_kbps.empty() || spec.video_ladder_mbps.empty()) {
    throw ConfigError("synthetic spec needs at least one clip and one rung per ladder");
  }
  auto positive = [](double v) { return v > 0.0 && std::isfinite(v); };
  if (!std::all_of(spec.audio_ladder_kbps.begin(), spec.audio_ladder_kbps.end(), positive) ||
      !std::all_of(spec.video_ladder_mbps.begin(), spec.video_ladder_mbps.end(), positive)) {
    throw ConfigError("bitrate ladders must be positive");
  }
  if (spec.w_a < 0.0 || spec.w_v < 0.0 || spec.noise_sigma < 0.0 || spec.interaction < 0.0 ||
      spec.interaction > 1.0 || !(spec.audio_signal_scale > 0.0)) {
    throw ConfigError("synthetic spec has out-of-range weights, noise or interaction");
  }
}

}  // namespace

double planted_mos(const SynthSpec& spec, double q_a, double q_v) {
  const double qa_n = (q_a - 1.0) / 4.0;
  const double qv_n = q_v / 100.0;
  if (spec.form == PlantedForm::product) {
    return std::pow(q_a, spec.w_a) * std::pow(1.0 + 4.0 * qv_n, spec.w_v);
  }
  const double additive = spec.w_a * qa_n + spec.w_v * qv_n;
  return 1.0 + 4.0 * ((1.0 - spec.interaction) * additive + spec.interaction * qa_n * qv_n);
}

std::vector<double> audio_probe(const SynthSpec& spec, std::uint64_t seed) {
  std::vector<double> p = planted_direction(seed);
  for (double& v : p) v /= spec.audio_signal_scale;
  return p;
}

Dataset synth_generate(const SynthSpec& spec, std::uint64_t seed) {
  validate(spec);
  const Rng root(seed);
  const std::vector<double> direction = planted_direction(seed);

  Rng clip_rng = root.split(kClipStream);
  std::vector<ClipTraits> clips(spec.n_clips);
  for (auto& c : clips) {
    c.audio_mid = clip_rng.uniform(std::log2(20.0), std::log2(64.0));
    c.video_mid = clip_rng.uniform(std::log2(0.7), std::log2(3.0));
    c.motion = clip_rng.uniform(0.0, 20.0);
    c.audio_content.resize(kAudioDim);
    for (double& v : c.audio_content) v = clip_rng.normal(0.0, spec.audio_clip_std);
  }

  Rng stim_rng = root.split(kStimulusStream);
  std::vector<FeatureRecord> records;
  records.reserve(spec.n_clips * spec.audio_ladder_kbps.size() * spec.video_ladder_mbps.size());
  for (std::size_t ci = 0; ci < clips.size(); ++ci) {
    const ClipTraits& clip = clips[ci];
    for (double abr : spec.audio_ladder_kbps) {
      for (double vbr : spec.video_ladder_mbps) {
        FeatureRecord r;
        r.source_clip_id = fmt::format("clip{:03d}", ci);
        r.stimulus_id = fmt::format("{}_a{}_v{}", r.source_clip_id, abr, vbr);
        r.audio_bitrate_kbps = abr;
        r.video_bitrate_mbps = vbr;

        const double qa_n = logistic(1.4 * (std::log2(abr) - clip.audio_mid));
        const double qv_n = logistic(1.6 * (std::log2(vbr) - clip.video_mid));
        r.q_a = 1.0 + 4.0 * qa_n;
        r.q_v = 100.0 * qv_n;

        // Audio embedding: clip content plus stimulus noise, orthogonal to the
        // planted direction, plus q_a along that direction.
        r.audio_feat.resize(kAudioDim);
        double along = 0.0;
        for (std::size_t d = 0; d < kAudioDim; ++d) {
          r.audio_feat[d] = clip.audio_content[d] + stim_rng.normal(0.0, spec.audio_stimulus_std);
          along += r.audio_feat[d] * direction[d];
        }
        for (std::size_t d = 0; d < kAudioDim; ++d) {
          r.audio_feat[d] += (r.q_a * spec.audio_signal_scale - along) * direction[d];
        }

        r.video_feat.resize(kVideoDim);
        for (std::size_t k = 0; k < 4; ++k) {
          const double vif = std::pow(qv_n, 1.0 + 0.4 * static_cast<double>(k)) + stim_rng.normal(0.0, 0.01);
          r.video_feat[k] = std::clamp(vif, 0.0, 1.0);
        }
        r.video_feat[4] = std::max(0.0, clip.motion + stim_rng.normal(0.0, 0.2));
        r.video_feat[5] = std::clamp(0.3 + 0.7 * std::pow(qv_n, 0.6) + stim_rng.normal(0.0, 0.01), 0.0, 1.0);

        double mos = planted_mos(spec, r.q_a, r.q_v);
        if (spec.noise_sigma > 0.0) mos += stim_rng.normal(0.0, spec.noise_sigma);
        r.mos = std::clamp(mos, 1.0, 5.0);
        records.push_back(std::move(r));
      }
    }
  }
  return Dataset(std::move(records));
}

}  // namespace avq
