#include "avq/data/vmaf.hpp"

#include <cmath>
#include <fstream>
#include <string>

#include "avq/errors.hpp"

namespace avq {
namespace {

double frame_metric(const nlohmann::json& metrics, std::string_view key, std::size_t frame) {
  const std::string names[] = {std::string(key), "integer_" + std::string(key)};
  for (const std::string& name : names) {
    auto it = metrics.find(name);
    if (it != metrics.end()) {
      if (!it->is_number() || !std::isfinite(it->get<double>())) {
        throw DataError("frame " + std::to_string(frame) + ": field '" + name + "' is not a finite number");
      }
      return it->get<double>();
    }
  }
  throw DataError("frame " + std::to_string(frame) + ": missing field '" + std::string(key) + "'");
}

}  // namespace

VideoFeatures pool_vmaf_frames(const nlohmann::json& vmaf_log) {
  auto frames = vmaf_log.find("frames");
  if (frames == vmaf_log.end() || !frames->is_array()) {
    throw DataError("VMAF log has no 'frames' array");
  }
  if (frames->empty()) throw DataError("VMAF log has zero frames");
  VideoFeatures sum{};
  std::size_t index = 0;
  for (const auto& frame : *frames) {
    auto metrics = frame.find("metrics");
    if (metrics == frame.end() || !metrics->is_object()) {
      throw DataError("frame " + std::to_string(index) + ": missing 'metrics' map");
    }
    for (std::size_t k = 0; k < kVideoDim; ++k) sum[k] += frame_metric(*metrics, kVmafFeatureKeys[k], index);
    ++index;
  }
  for (double& v : sum) v /= static_cast<double>(index);
  return sum;
}

VideoFeatures pool_vmaf_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open VMAF log '" + path.string() + "'");
  try {
    return pool_vmaf_frames(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("VMAF log '" + path.string() + "': " + e.what());
  }
}

}  // namespace avq
