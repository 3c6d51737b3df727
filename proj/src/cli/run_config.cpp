#include "avq/cli/run_config.hpp"

#include <fstream>

#include <fmt/format.h>

#include "avq/errors.hpp"
#include "avq/tensor/rng.hpp"

namespace avq {
namespace {

void require_object(const nlohmann::json& j, const char* section) {
  if (!j.is_object()) throw ConfigError(fmt::format("config section '{}' must be an object", section));
}

PlantedForm parse_form(const std::string& s) {
  if (s == "linear") return PlantedForm::linear;
  if (s == "product") return PlantedForm::product;
  throw ConfigError("unknown planted form '" + s + "' (expected linear or product)");
}

void apply_baseline(const nlohmann::json& j, BaselineSettings& b) {
  require_object(j, "baseline");
  for (const auto& [key, value] : j.items()) {
    if (key == "fixed_weights") {
      require_object(value, "baseline.fixed_weights");
      for (const auto& [k, v] : value.items()) {
        if (k == "w_a") b.fixed_weights.w_a = v.get<double>();
        else if (k == "w_v") b.fixed_weights.w_v = v.get<double>();
        else throw ConfigError("unknown key 'baseline.fixed_weights." + k + "'");
      }
    } else if (key == "svr") {
      b.svr.clear();
      for (const auto& label : value) b.svr.push_back(parse_svr_features(label.get<std::string>()));
    } else if (key == "svr_C") b.svr_C = value.get<std::vector<double>>();
    else if (key == "svr_gamma") b.svr_gamma = value.get<std::vector<double>>();
    else if (key == "svr_epsilon") b.svr_epsilon = value.get<double>();
    else if (key == "svr_folds") b.svr_folds = value.get<std::size_t>();
    else if (key == "test_dataset") b.test_dataset = value.get<std::string>();
    else throw ConfigError("unknown key 'baseline." + key + "'");
  }
}

void apply_explain(const nlohmann::json& j, ImportanceWeights& w) {
  require_object(j, "explain");
  for (const auto& [key, value] : j.items()) {
    if (key == "alpha") w.alpha = value.get<double>();
    else if (key == "beta") w.beta = value.get<double>();
    else throw ConfigError("unknown key 'explain." + key + "'");
  }
}

}  // namespace

std::uint64_t stage_seed(std::uint64_t seed, Stage stage) {
  return Rng(seed).split(static_cast<std::uint64_t>(stage)).seed();
}

void RunConfig::validate() const {
  model.validate();
  train.validate();
  explain.validate();
  if (synth.n_clips == 0 || synth.audio_ladder_kbps.empty() || synth.video_ladder_mbps.empty()) {
    throw ConfigError("synth needs at least one clip and one rung per ladder");
  }
  if (synth.noise_sigma < 0.0) throw ConfigError("synth.noise_sigma must be >= 0");
  if (synth.interaction < 0.0 || synth.interaction > 1.0) throw ConfigError("synth.interaction must lie in [0, 1]");
  if (baseline.fixed_weights.w_a < 0.0 || baseline.fixed_weights.w_v < 0.0) {
    throw ConfigError("baseline.fixed_weights must be non-negative");
  }
  if (baseline.svr_folds < 2) throw ConfigError("baseline.svr_folds must be >= 2");
  for (double c : baseline.svr_C) SvrParams{c, 1.0, baseline.svr_epsilon}.validate();
  for (double g : baseline.svr_gamma) SvrParams{1.0, g, baseline.svr_epsilon}.validate();
}

nlohmann::json to_json(const SynthSpec& s) {
  return {
      {"n_clips", s.n_clips},
      {"audio_ladder_kbps", s.audio_ladder_kbps},
      {"video_ladder_mbps", s.video_ladder_mbps},
      {"form", s.form == PlantedForm::linear ? "linear" : "product"},
      {"w_a", s.w_a},
      {"w_v", s.w_v},
      {"interaction", s.interaction},
      {"noise_sigma", s.noise_sigma},
      {"audio_signal_scale", s.audio_signal_scale},
      {"audio_clip_std", s.audio_clip_std},
      {"audio_stimulus_std", s.audio_stimulus_std},
  };
}

void apply_json(const nlohmann::json& j, SynthSpec& s) {
  require_object(j, "synth");
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "n_clips") s.n_clips = value.get<std::size_t>();
      else if (key == "audio_ladder_kbps") s.audio_ladder_kbps = value.get<std::vector<double>>();
      else if (key == "video_ladder_mbps") s.video_ladder_mbps = value.get<std::vector<double>>();
      else if (key == "form") s.form = parse_form(value.get<std::string>());
      else if (key == "w_a") s.w_a = value.get<double>();
      else if (key == "w_v") s.w_v = value.get<double>();
      else if (key == "interaction") s.interaction = value.get<double>();
      else if (key == "noise_sigma") s.noise_sigma = value.get<double>();
      else if (key == "audio_signal_scale") s.audio_signal_scale = value.get<double>();
      else if (key == "audio_clip_std") s.audio_clip_std = value.get<double>();
      else if (key == "audio_stimulus_std") s.audio_stimulus_std = value.get<double>();
      else throw ConfigError("unknown key 'synth." + key + "'");
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(fmt::format("synth.{}: {}", key, e.what()));
    }
  }
}

nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json train = c.train;
  train.erase("seed");
  nlohmann::json svr = nlohmann::json::array();
  for (auto s : c.baseline.svr) svr.push_back(std::string(to_string(s)));
  return {
      {"seed", c.seed},
      {"out", c.out},
      {"dataset", c.dataset},
      {"checkpoint", c.checkpoint},
      {"scale", std::string(to_string(c.scale))},
      {"held_out_clips", c.held_out_clips},
      {"write_predictions", c.write_predictions},
      {"synth", to_json(c.synth)},
      {"model", c.model},
      {"train", train},
      {"baseline",
       {{"fixed_weights", {{"w_a", c.baseline.fixed_weights.w_a}, {"w_v", c.baseline.fixed_weights.w_v}}},
        {"svr", svr},
        {"svr_C", c.baseline.svr_C},
        {"svr_gamma", c.baseline.svr_gamma},
        {"svr_epsilon", c.baseline.svr_epsilon},
        {"svr_folds", c.baseline.svr_folds},
        {"test_dataset", c.baseline.test_dataset}}},
      {"explain", {{"alpha", c.explain.alpha}, {"beta", c.explain.beta}}},
  };
}

void apply_json(const nlohmann::json& j, RunConfig& c) {
  require_object(j, "<root>");
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "out") c.out = value.get<std::string>();
      else if (key == "dataset") c.dataset = value.get<std::string>();
      else if (key == "checkpoint") c.checkpoint = value.get<std::string>();
      else if (key == "scale") c.scale = parse_scale(value.get<std::string>());
      else if (key == "held_out_clips") c.held_out_clips = value.get<std::size_t>();
      else if (key == "write_predictions") c.write_predictions = value.get<bool>();
      else if (key == "synth") apply_json(value, c.synth);
      else if (key == "model") from_json(value, c.model);
      else if (key == "train") {
        if (value.is_object() && value.contains("seed")) {
          throw ConfigError("train.seed is derived from the top-level seed; set 'seed' instead");
        }
        from_json(value, c.train);
      } else if (key == "baseline") apply_baseline(value, c.baseline);
      else if (key == "explain") apply_explain(value, c.explain);
      else throw ConfigError("unknown config key '" + key + "'");
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(fmt::format("config key '{}': {}", key, e.what()));
    } catch (const DataError& e) {
      throw ConfigError(fmt::format("config key '{}': {}", key, e.what()));
    }
  }
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("{}: {}", path.string(), e.what()));
  }
  RunConfig c;
  apply_json(j, c);
  return c;
}

}  // namespace avq
