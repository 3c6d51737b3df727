#pragma once

#include <array>
#include <filesystem>
#include <string_view>

#include <json.hpp>

#include "avq/data/dataset.hpp"

namespace avq {

/// Clip-level VMAF features in the fixed order
/// [vif_scale0, vif_scale1, vif_scale2, vif_scale3, motion2, adm].
using VideoFeatures = std::array<double, kVideoDim>;

/// Metric keys read from each frame's "metrics" map, in output order. The
/// libvmaf "integer_" prefixed spellings are accepted as well; ADM is "adm2".
inline constexpr std::array<std::string_view, kVideoDim> kVmafFeatureKeys = {
    "vif_scale0", "vif_scale1", "vif_scale2", "vif_scale3", "motion2", "adm2"};

/// Arithmetic mean of the six features over the "frames" array of a VMAF
/// JSON log. DataError on zero frames or a frame missing a feature.
VideoFeatures pool_vmaf_frames(const nlohmann::json& vmaf_log);
VideoFeatures pool_vmaf_file(const std::filesystem::path& path);

}  // namespace avq
