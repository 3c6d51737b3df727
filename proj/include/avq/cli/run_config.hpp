#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "avq/baseline/svr.hpp"
#include "avq/baseline/weighted_product.hpp"
#include "avq/data/synth.hpp"
#include "avq/importance/importance.hpp"
#include "avq/model/fusion_net.hpp"
#include "avq/train/trainer.hpp"

namespace avq {

struct BaselineSettings {
  ProductWeights fixed_weights{0.3, 0.7};
  std::vector<SvrFeatureSet> svr{SvrFeatureSet::f2, SvrFeatureSet::f3, SvrFeatureSet::f7, SvrFeatureSet::f8};
  std::vector<double> svr_C{0.1, 1, 10, 100};
  std::vector<double> svr_gamma{0.01, 0.1, 1, 10};
  double svr_epsilon = 0.1;
  /// Clip-grouped folds of the training part; the first one selects (C, gamma).
  std::size_t svr_folds = 5;
  /// Optional separate test file. When empty, clips are held out of `dataset`.
  std::string test_dataset;
};

/// Everything a subcommand reads. Precedence: built-in defaults, then the
/// config file, then command-line flags.
struct RunConfig {
  std::uint64_t seed = 0;
  std::string out = "out";
  std::string dataset;
  std::string checkpoint;
  Scale scale = Scale::mos5;
  std::size_t held_out_clips = 5;
  SynthSpec synth;
  ModelConfig model;
  TrainConfig train;  // train.seed is derived from `seed`, never read from the file
  BaselineSettings baseline;
  ImportanceWeights explain;
  /// Also write per-stimulus predictions when evaluating.
  bool write_predictions = true;

  void validate() const;
};

/// Independent stream seeds per pipeline stage.
enum class Stage : std::uint64_t { generate = 1, split = 2, train = 3, baseline = 4 };
std::uint64_t stage_seed(std::uint64_t seed, Stage stage);

nlohmann::json to_json(const RunConfig& c);
/// Overlays `j` on `c`. ConfigError on unknown keys or wrong types.
void apply_json(const nlohmann::json& j, RunConfig& c);
RunConfig load_run_config(const std::filesystem::path& path);

nlohmann::json to_json(const SynthSpec& s);
void apply_json(const nlohmann::json& j, SynthSpec& s);

}  // namespace avq
