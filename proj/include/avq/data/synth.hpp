#pragma once

#include <cstdint>
#include <vector>

#include "avq/data/dataset.hpp"

namespace avq {

enum class PlantedForm { linear, product };

/// Recipe for a synthetic full-factorial corpus (clips x audio ladder x video
/// ladder) whose MOS is a known function of the unimodal scores.
struct SynthSpec {
  std::size_t n_clips = 65;
  std::vector<double> audio_ladder_kbps{16, 32, 64, 96, 256};
  std::vector<double> video_ladder_mbps{0.5, 1, 2, 4, 25};
  PlantedForm form = PlantedForm::linear;
  double w_a = 0.3;
  double w_v = 0.7;
  /// Share of the linear form replaced by the cross-modal term qa_n * qv_n.
  double interaction = 0.0;
  /// Std of Gaussian noise added to the planted MOS (then clamped to [1, 5]).
  double noise_sigma = 0.0;
  /// Length of the planted audio direction per unit of q_a.
  double audio_signal_scale = 1.0;
  double audio_clip_std = 0.8;
  double audio_stimulus_std = 0.6;

  friend bool operator==(const SynthSpec&, const SynthSpec&) = default;
};

/// Noiseless planted MOS evaluated from the record's own q_a (on [1,5]) and
/// q_v (on [0,100]). Linear form:
///   1 + 4 * ((1 - interaction) * (w_a*qa_n + w_v*qv_n) + interaction * qa_n*qv_n)
/// with qa_n = (q_a - 1)/4, qv_n = q_v/100. Product form: q_a^w_a * (1 + 4*qv_n)^w_v.
/// Not clamped.
double planted_mos(const SynthSpec& spec, double q_a, double q_v);

/// Linear probe p with p . audio_feat == q_a for every record generated under `seed`.
std::vector<double> audio_probe(const SynthSpec& spec, std::uint64_t seed);

Dataset synth_generate(const SynthSpec& spec, std::uint64_t seed);

}  // namespace avq
