#include "avq/model/fusion_net.hpp"

#include <cmath>

#include "avq/errors.hpp"
#include "avq/tensor/rng.hpp"

namespace avq {
namespace {

Linear make_linear(std::size_t in, std::size_t out) { return {Matrix(in, out), Matrix(1, out)}; }

AttentionBlock make_block(std::size_t width) {
  return {make_linear(width, width), make_linear(width, width), make_linear(width, width),
          make_linear(width, width)};
}

std::size_t linear_count(std::size_t in, std::size_t out) { return in * out + out; }
std::size_t block_count(std::size_t width) { return 4 * linear_count(width, width); }

template <class Params, class Out>
void enumerate(Params& p, Out& out) {
  auto add_linear = [&](const std::string& name, auto& lin) {
    out.emplace_back(name + ".weight", &lin.weight);
    out.emplace_back(name + ".bias", &lin.bias);
  };
  auto add_blocks = [&](const std::string& prefix, auto& blocks) {
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      const std::string base = prefix + "." + std::to_string(i);
      add_linear(base + ".query", blocks[i].query);
      add_linear(base + ".key", blocks[i].key);
      add_linear(base + ".value", blocks[i].value);
      add_linear(base + ".output", blocks[i].output);
    }
  };
  add_linear("video_proj", p.video_proj);
  add_blocks("audio_to_video", p.audio_to_video);
  add_blocks("video_to_audio", p.video_to_audio);
  add_blocks("joint", p.joint);
  add_linear("head_hidden", p.head_hidden);
  add_linear("head_out", p.head_out);
}

LinearVars bind_linear(Tape& tape, const Linear& lin, std::vector<Var>& leaves) {
  LinearVars v{tape.parameter(lin.weight), tape.parameter(lin.bias)};
  leaves.push_back(v.weight);
  leaves.push_back(v.bias);
  return v;
}

std::vector<BlockVars> bind_blocks(Tape& tape, const std::vector<AttentionBlock>& blocks,
                                   std::vector<Var>& leaves) {
  std::vector<BlockVars> out;
  for (const auto& b : blocks) {
    BlockVars bv;
    bv.query = bind_linear(tape, b.query, leaves);
    bv.key = bind_linear(tape, b.key, leaves);
    bv.value = bind_linear(tape, b.value, leaves);
    bv.output = bind_linear(tape, b.output, leaves);
    out.push_back(bv);
  }
  return out;
}

Var linear(const Var& x, const LinearVars& l) { return avq::linear(x, l.weight, l.bias); }

}  // namespace

Variant parse_variant(std::string_view name) {
  if (name == "full") return Variant::full;
  if (name == "no_attention") return Variant::no_attention;
  if (name == "cross_only") return Variant::cross_only;
  throw ConfigError("unknown variant '" + std::string(name) + "' (expected full, no_attention or cross_only)");
}

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::full: return "full";
    case Variant::no_attention: return "no_attention";
    case Variant::cross_only: return "cross_only";
  }
  return "full";
}

void ModelConfig::validate() const {
  if (d_model == 0 || d_video == 0 || d_ff == 0) throw ConfigError("model widths must be positive");
  if (heads == 0 || d_model % heads != 0) {
    throw ConfigError("cross-attention width " + std::to_string(d_model) + " not divisible by " +
                      std::to_string(heads) + " heads");
  }
  if (heads_joint == 0 || d_joint() % heads_joint != 0) {
    throw ConfigError("joint width " + std::to_string(d_joint()) + " not divisible by " +
                      std::to_string(heads_joint) + " heads");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) {
    throw ConfigError("dropout must lie in [0, 1), got " + std::to_string(dropout));
  }
  if (variant != Variant::no_attention && cross_layers == 0) {
    throw ConfigError("attention variants need at least one cross-attention layer");
  }
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"d_model", c.d_model},
                     {"d_video", c.d_video},
                     {"heads", c.heads},
                     {"heads_joint", c.heads_joint},
                     {"d_ff", c.d_ff},
                     {"dropout", c.dropout},
                     {"self_layers", c.self_layers},
                     {"cross_layers", c.cross_layers},
                     {"activation", std::string(to_string(c.activation))},
                     {"variant", std::string(to_string(c.variant))}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  if (!j.is_object()) throw ConfigError("model config must be an object");
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "d_model") c.d_model = value.get<std::size_t>();
      else if (key == "d_video") c.d_video = value.get<std::size_t>();
      else if (key == "heads") c.heads = value.get<std::size_t>();
      else if (key == "heads_joint") c.heads_joint = value.get<std::size_t>();
      else if (key == "d_ff") c.d_ff = value.get<std::size_t>();
      else if (key == "dropout") c.dropout = value.get<double>();
      else if (key == "self_layers") c.self_layers = value.get<std::size_t>();
      else if (key == "cross_layers") c.cross_layers = value.get<std::size_t>();
      else if (key == "activation") c.activation = parse_activation(value.get<std::string>());
      else if (key == "variant") c.variant = parse_variant(value.get<std::string>());
      else throw ConfigError("unknown model config key '" + key + "'");
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("model config key '" + key + "': " + e.what());
    }
  }
}

std::vector<std::pair<std::string, Matrix*>> FusionNetParams::tensors() {
  std::vector<std::pair<std::string, Matrix*>> out;
  enumerate(*this, out);
  return out;
}

std::vector<std::pair<std::string, const Matrix*>> FusionNetParams::tensors() const {
  std::vector<std::pair<std::string, const Matrix*>> out;
  enumerate(*this, out);
  return out;
}

FusionNetParams init_params(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  FusionNetParams p;
  p.config = config;
  p.video_proj = make_linear(config.d_video, config.d_model);
  if (config.variant != Variant::no_attention) {
    for (std::size_t i = 0; i < config.cross_layers; ++i) {
      p.audio_to_video.push_back(make_block(config.d_model));
      p.video_to_audio.push_back(make_block(config.d_model));
    }
  }
  if (config.variant == Variant::full) {
    for (std::size_t i = 0; i < config.self_layers; ++i) p.joint.push_back(make_block(config.d_joint()));
  }
  p.head_hidden = make_linear(config.d_joint(), config.d_ff);
  p.head_out = make_linear(config.d_ff, 1);

  const Rng root(seed);
  std::uint64_t stream = 0;
  for (auto& [name, tensor] : p.tensors()) {
    Rng rng = root.split(stream++);
    if (tensor->rows() == 1) continue;  // bias
    const double bound =
        std::sqrt(6.0 / static_cast<double>(tensor->rows() + tensor->cols()));
    for (double& v : tensor->data()) v = rng.uniform(-bound, bound);
  }
  return p;
}

std::size_t param_count(const FusionNetParams& params) {
  std::size_t n = 0;
  for (const auto& [name, tensor] : params.tensors()) n += tensor->size();
  return n;
}

std::vector<ParamGroup> param_breakdown(const ModelConfig& c) {
  std::vector<ParamGroup> out;
  out.push_back({"video_proj", linear_count(c.d_video, c.d_model)});
  if (c.variant != Variant::no_attention) {
    for (std::size_t i = 0; i < c.cross_layers; ++i) {
      out.push_back({"audio_to_video." + std::to_string(i), block_count(c.d_model)});
      out.push_back({"video_to_audio." + std::to_string(i), block_count(c.d_model)});
    }
  }
  if (c.variant == Variant::full) {
    for (std::size_t i = 0; i < c.self_layers; ++i) {
      out.push_back({"joint." + std::to_string(i), block_count(c.d_joint())});
    }
  }
  out.push_back({"head_hidden", linear_count(c.d_joint(), c.d_ff)});
  out.push_back({"head_out", linear_count(c.d_ff, 1)});
  return out;
}

std::size_t param_count(const ModelConfig& config) {
  std::size_t n = 0;
  for (const auto& g : param_breakdown(config)) n += g.count;
  return n;
}

BoundParams bind(Tape& tape, const FusionNetParams& params) {
  BoundParams b;
  b.video_proj = bind_linear(tape, params.video_proj, b.leaves);
  b.audio_to_video = bind_blocks(tape, params.audio_to_video, b.leaves);
  b.video_to_audio = bind_blocks(tape, params.video_to_audio, b.leaves);
  b.joint = bind_blocks(tape, params.joint, b.leaves);
  b.head_hidden = bind_linear(tape, params.head_hidden, b.leaves);
  b.head_out = bind_linear(tape, params.head_out, b.leaves);
  return b;
}

std::vector<Matrix> collect_grads(const Tape& tape, const BoundParams& bound) {
  std::vector<Matrix> out;
  out.reserve(bound.leaves.size());
  for (const Var& v : bound.leaves) out.push_back(tape.grad(v));
  return out;
}

Var project_video(Var x_v, const LinearVars& proj, Activation act) {
  return activate(linear(x_v, proj), act);
}

Var attention_block(Var query_side, Var kv_side, const BlockVars& block, std::size_t heads,
                    std::size_t seq_len, bool single_key_shortcut) {
  if (query_side.rows() != kv_side.rows()) {
    throw DimensionError("attention_block: query side " + query_side.value().shape() +
                         " and key/value side " + kv_side.value().shape() + " differ in rows");
  }
  Var values = linear(kv_side, block.value);
  Var mixed;
  if (seq_len == 1 && single_key_shortcut) {
    if (heads == 0 || values.cols() % heads != 0) {
      throw ConfigError("attention: width " + std::to_string(values.cols()) + " not divisible by " +
                        std::to_string(heads) + " heads");
    }
    mixed = values;
  } else {
    Var queries = linear(query_side, block.query);
    Var keys = linear(kv_side, block.key);
    mixed = attention(queries, keys, values, heads, seq_len);
  }
  return linear(mixed, block.output);
}

ForwardTrace forward(Tape& tape, const BoundParams& bound, const ModelConfig& config,
                     const ModelInput& input, const ForwardOptions& options) {
  const std::size_t n = input.seq_len;
  if (n == 0 || input.audio.rows() % n != 0 || input.audio.rows() != input.video.rows()) {
    throw DimensionError("forward: audio " + input.audio.shape() + " and video " + input.video.shape() +
                         " do not form whole sequences of length " + std::to_string(n));
  }
  if (input.audio.cols() != config.d_model) {
    throw DimensionError("forward: audio width " + std::to_string(input.audio.cols()) + ", expected " +
                         std::to_string(config.d_model));
  }
  if (input.video.cols() != config.d_video) {
    throw DimensionError("forward: video width " + std::to_string(input.video.cols()) + ", expected " +
                         std::to_string(config.d_video));
  }
  if (options.mode == Mode::train && config.dropout > 0.0 && options.rng == nullptr) {
    throw ContractError("forward: train mode with dropout needs an Rng");
  }

  ForwardTrace tr;
  tr.audio_pre = options.mask_audio ? tape.constant(Matrix(input.audio.rows(), input.audio.cols()))
                                    : tape.constant(input.audio);
  Var video_in = tape.constant(input.video);
  tr.video_pre = project_video(video_in, bound.video_proj, config.activation);
  if (options.mask_video) {
    tr.video_pre = tape.constant(Matrix(tr.video_pre.rows(), tr.video_pre.cols()));
  }

  if (config.variant == Variant::no_attention) {
    tr.audio_post = tr.audio_pre;
    tr.video_post = tr.video_pre;
    tr.joint = concat_cols(tr.audio_pre, tr.video_pre);
    tr.joint_self = tr.joint;
  } else {
    Var a = tr.audio_pre;
    Var v = tr.video_pre;
    for (std::size_t l = 0; l < bound.audio_to_video.size(); ++l) {
      Var next_v = attention_block(v, a, bound.audio_to_video[l], config.heads, n);
      Var next_a = attention_block(a, v, bound.video_to_audio[l], config.heads, n);
      a = next_a;
      v = next_v;
    }
    tr.audio_post = a;
    tr.video_post = v;
    tr.joint = concat_cols(a, v);
    Var j = tr.joint;
    for (const auto& layer : bound.joint) j = attention_block(j, j, layer, config.heads_joint, n);
    tr.joint_self = j;
  }

  tr.pooled = mean_segments(tr.joint_self, n);
  Var hidden = activate(linear(tr.pooled, bound.head_hidden), config.activation);
  if (options.mode == Mode::train && config.dropout > 0.0) {
    hidden = dropout(hidden, config.dropout, Mode::train, *options.rng);
  }
  tr.prediction = linear(hidden, bound.head_out);
  return tr;
}

std::vector<double> predict(const FusionNetParams& params, const ModelInput& input,
                            const ForwardOptions& options) {
  ForwardOptions eval = options;
  eval.mode = Mode::eval;
  Tape tape;
  const BoundParams bound = bind(tape, params);
  const ForwardTrace tr = forward(tape, bound, params.config, input, eval);
  const auto data = tr.prediction.value().data();
  return {data.begin(), data.end()};
}

}  // namespace avq
