#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "avq/tensor/matrix.hpp"
#include "avq/tensor/ops.hpp"
#include "avq/tensor/tape.hpp"

namespace avq {

enum class Variant {
  full,          // projection, bidirectional cross-attention, joint self-attention, head
  no_attention,  // head on [x_a; x_v'] directly
  cross_only,    // cross-attention without the self-attention stack
};

Variant parse_variant(std::string_view name);
std::string_view to_string(Variant v);

struct ModelConfig {
  std::size_t d_model = 512;  // audio embedding width and cross-attention width
  std::size_t d_video = 6;
  std::size_t heads = 4;        // cross-attention heads
  std::size_t heads_joint = 4;  // self-attention heads over the 2*d_model joint width
  std::size_t d_ff = 512;
  double dropout = 0.6;
  std::size_t self_layers = 1;
  std::size_t cross_layers = 1;  // per direction
  Activation activation = Activation::gelu;
  Variant variant = Variant::full;

  std::size_t d_joint() const noexcept { return 2 * d_model; }
  /// Throws ConfigError on zero sizes, head counts that do not divide the
  /// attention widths, or a dropout outside [0, 1).
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
/// Rejects unknown keys; missing keys keep their defaults.
void from_json(const nlohmann::json& j, ModelConfig& c);

/// Affine map x * weight + bias; weight is [in x out], bias [1 x out].
struct Linear {
  Matrix weight;
  Matrix bias;
};

struct AttentionBlock {
  Linear query;
  Linear key;
  Linear value;
  Linear output;
};

struct FusionNetParams {
  ModelConfig config;
  Linear video_proj;
  /// Video queries attend to audio keys/values; produces the video-side output.
  std::vector<AttentionBlock> audio_to_video;
  /// Audio queries attend to video keys/values; produces the audio-side output.
  std::vector<AttentionBlock> video_to_audio;
  std::vector<AttentionBlock> joint;
  Linear head_hidden;
  Linear head_out;

  /// Every trainable tensor with a stable dotted name, in a fixed order.
  std::vector<std::pair<std::string, Matrix*>> tensors();
  std::vector<std::pair<std::string, const Matrix*>> tensors() const;
};

/// Xavier-uniform weights (bound sqrt(6/(fan_in+fan_out))), zero biases.
FusionNetParams init_params(const ModelConfig& config, std::uint64_t seed);

std::size_t param_count(const FusionNetParams& params);
/// Same count computed from the configuration alone.
std::size_t param_count(const ModelConfig& config);

struct ParamGroup {
  std::string name;
  std::size_t count;
};
/// Per-stage counts (projection, each attention block, head) summing to param_count.
std::vector<ParamGroup> param_breakdown(const ModelConfig& config);

/// Tape leaves for every tensor, in FusionNetParams::tensors() order.
struct LinearVars {
  Var weight;
  Var bias;
};
struct BlockVars {
  LinearVars query, key, value, output;
};
struct BoundParams {
  LinearVars video_proj;
  std::vector<BlockVars> audio_to_video;
  std::vector<BlockVars> video_to_audio;
  std::vector<BlockVars> joint;
  LinearVars head_hidden;
  LinearVars head_out;
  std::vector<Var> leaves;
};

BoundParams bind(Tape& tape, const FusionNetParams& params);
/// Gradients of the last backward() for each leaf, in tensors() order.
std::vector<Matrix> collect_grads(const Tape& tape, const BoundParams& bound);

/// A batch of B stimuli with N temporal units each, stacked row-wise.
struct ModelInput {
  Matrix audio;  // [(B*N) x d_model]
  Matrix video;  // [(B*N) x d_video]
  std::size_t seq_len = 1;

  std::size_t batch() const { return seq_len == 0 ? 0 : audio.rows() / seq_len; }
};

struct ForwardOptions {
  Mode mode = Mode::eval;
  Rng* rng = nullptr;  // required in train mode when dropout > 0
  bool mask_audio = false;  // zero the audio embedding entering fusion
  bool mask_video = false;  // zero the projected video embedding entering fusion
};

/// Intermediate nodes of one forward pass.
struct ForwardTrace {
  Var audio_pre;   // X_a as it enters cross-attention
  Var video_pre;   // X_v' = act(X_v W_v + b)
  Var audio_post;  // audio-side cross-attended output
  Var video_post;  // video-side cross-attended output
  Var joint;       // concatenation [audio_post; video_post] (or [X_a; X_v'] without attention)
  Var joint_self;  // after the self-attention stack
  Var pooled;      // mean over the N temporal units
  Var prediction;  // [B x 1]
};

Var project_video(Var x_v, const LinearVars& proj, Activation act);

/// Multi-head attention block: queries from `query_side`, keys and values from
/// `kv_side`, followed by the output projection. At seq_len 1 the softmax is
/// exactly 1, so the block reduces to ((kv W_V + b_V) W_O + b_O); the query and
/// key projections are then skipped unless `single_key_shortcut` is false.
Var attention_block(Var query_side, Var kv_side, const BlockVars& block, std::size_t heads,
                    std::size_t seq_len, bool single_key_shortcut = true);

ForwardTrace forward(Tape& tape, const BoundParams& bound, const ModelConfig& config,
                     const ModelInput& input, const ForwardOptions& options = {});

/// Eval-mode predictions, one per stimulus.
std::vector<double> predict(const FusionNetParams& params, const ModelInput& input,
                            const ForwardOptions& options = {});

}  // namespace avq
