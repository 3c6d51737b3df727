#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>

#include "avq/data/dataset.hpp"
#include "avq/model/fusion_net.hpp"

namespace avq {

/// Everything needed to reproduce predictions on raw feature files.
struct Checkpoint {
  FusionNetParams params;
  std::uint64_t seed = 0;
  /// Standardization fitted on the training data, applied to raw inputs.
  std::optional<FeatureStats> feature_stats;
  /// Scale of the MOS targets the model was trained on.
  Scale scale = Scale::mos5;
};

// Layout: the 8-byte magic "AVQCKPT1", a little-endian uint64 header length,
// a JSON header {config, seed, scale, feature_stats, tensors:[{name,rows,cols}]},
// then every tensor's row-major doubles (IEEE-754, little-endian) in header order.
void write_checkpoint(const Checkpoint& ckpt, std::ostream& out);
Checkpoint read_checkpoint(std::istream& in);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

nlohmann::json stats_to_json(const FeatureStats& stats);
FeatureStats stats_from_json(const nlohmann::json& j);

}  // namespace avq
