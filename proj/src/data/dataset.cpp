#include "avq/data/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "avq/errors.hpp"
#include "avq/tensor/rng.hpp"

namespace avq {
namespace {

using nlohmann::json;

double& feature_ref(FeatureRecord& r, std::size_t dim) {
  if (dim < kAudioDim) return r.audio_feat.at(dim);
  if (dim < kQaDim) return r.video_feat.at(dim - kAudioDim);
  switch (dim) {
    case kQaDim: return r.q_a;
    case kQvDim: return r.q_v;
    case kAudioBitrateDim: return r.audio_bitrate_kbps;
    case kVideoBitrateDim: return r.video_bitrate_mbps;
    default: break;
  }
  throw ContractError("feature index " + std::to_string(dim) + " out of range");
}

void check_arity(const FeatureRecord& r) {
  if (r.audio_feat.size() != kAudioDim) {
    throw DataError("record '" + r.stimulus_id + "': audio_feat has " +
                    std::to_string(r.audio_feat.size()) + " values, expected " +
                    std::to_string(kAudioDim));
  }
  if (r.video_feat.size() != kVideoDim) {
    throw DataError("record '" + r.stimulus_id + "': video_feat has " +
                    std::to_string(r.video_feat.size()) + " values, expected " +
                    std::to_string(kVideoDim));
  }
}

double number_field(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) throw DataError(std::string("missing field '") + key + "'");
  if (!it->is_number()) throw DataError(std::string("field '") + key + "' is not a number");
  const double v = it->get<double>();
  if (!std::isfinite(v)) throw DataError(std::string("field '") + key + "' is not finite");
  return v;
}

std::string string_field(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) throw DataError(std::string("missing field '") + key + "'");
  if (!it->is_string()) throw DataError(std::string("field '") + key + "' is not a string");
  return it->get<std::string>();
}

std::vector<double> vector_field(const json& obj, const char* key, std::size_t arity) {
  auto it = obj.find(key);
  if (it == obj.end()) throw DataError(std::string("missing field '") + key + "'");
  if (!it->is_array()) throw DataError(std::string("field '") + key + "' is not an array");
  if (it->size() != arity) {
    throw DataError(std::string("field '") + key + "' has " + std::to_string(it->size()) +
                    " values, expected arity " + std::to_string(arity));
  }
  std::vector<double> out;
  out.reserve(arity);
  for (const auto& v : *it) {
    if (!v.is_number()) throw DataError(std::string("field '") + key + "' holds a non-number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw DataError(std::string("field '") + key + "' holds a non-finite value");
    out.push_back(d);
  }
  return out;
}

FeatureRecord record_from_json(const json& obj) {
  if (!obj.is_object()) throw DataError("line is not a JSON object");
  FeatureRecord r;
  r.stimulus_id = string_field(obj, "stimulus_id");
  r.source_clip_id = string_field(obj, "source_clip_id");
  r.audio_feat = vector_field(obj, "audio_feat", kAudioDim);
  r.video_feat = vector_field(obj, "video_feat", kVideoDim);
  r.q_a = number_field(obj, "q_a");
  r.q_v = number_field(obj, "q_v");
  r.audio_bitrate_kbps = number_field(obj, "audio_bitrate_kbps");
  r.video_bitrate_mbps = number_field(obj, "video_bitrate_mbps");
  r.mos = number_field(obj, "mos");
  return r;
}

json record_to_json(const FeatureRecord& r) {
  return json{{"stimulus_id", r.stimulus_id},
              {"source_clip_id", r.source_clip_id},
              {"audio_feat", r.audio_feat},
              {"video_feat", r.video_feat},
              {"q_a", r.q_a},
              {"q_v", r.q_v},
              {"audio_bitrate_kbps", r.audio_bitrate_kbps},
              {"video_bitrate_mbps", r.video_bitrate_mbps},
              {"mos", r.mos}};
}

}  // namespace

double FeatureRecord::feature(std::size_t dim) const {
  return feature_ref(const_cast<FeatureRecord&>(*this), dim);
}

double& FeatureRecord::feature(std::size_t dim) { return feature_ref(*this, dim); }

void validate_record(const FeatureRecord& r) {
  check_arity(r);
  for (std::size_t d = 0; d < kFeatureDim; ++d) {
    if (!std::isfinite(r.feature(d))) {
      throw DataError("record '" + r.stimulus_id + "': non-finite feature at index " + std::to_string(d));
    }
  }
  if (!std::isfinite(r.mos) || r.mos < 1.0 || r.mos > 5.0) {
    throw DataError("record '" + r.stimulus_id + "': mos " + std::to_string(r.mos) + " outside [1, 5]");
  }
  if (r.q_v < 0.0 || r.q_v > 100.0) {
    throw DataError("record '" + r.stimulus_id + "': q_v " + std::to_string(r.q_v) + " outside [0, 100]");
  }
  if (!(r.audio_bitrate_kbps > 0.0) || !(r.video_bitrate_mbps > 0.0)) {
    throw DataError("record '" + r.stimulus_id + "': bitrates must be positive");
  }
}

double FeatureStats::apply(std::size_t dim, double x) const {
  const double s = spread.at(dim);
  if (s == 0.0) return 0.0;
  return (x - center[dim]) / s;
}

FeatureRecord FeatureStats::apply(const FeatureRecord& record) const {
  FeatureRecord out = record;
  for (std::size_t d = 0; d < kFeatureDim; ++d) out.feature(d) = apply(d, record.feature(d));
  return out;
}

Dataset::Dataset(std::vector<FeatureRecord> records, std::optional<FeatureStats> normalization)
    : records_(std::move(records)), normalization_(std::move(normalization)) {
  std::unordered_set<std::string> seen;
  for (const auto& r : records_) {
    check_arity(r);
    if (!seen.insert(r.stimulus_id).second) {
      throw DataError("duplicate stimulus_id '" + r.stimulus_id + "'");
    }
  }
  if (normalization_ && (normalization_->center.size() != kFeatureDim ||
                         normalization_->spread.size() != kFeatureDim)) {
    throw DataError("normalization state must hold one statistic pair per feature dimension (" +
                    std::to_string(kFeatureDim) + ")");
  }
}

std::vector<std::string> Dataset::clip_ids() const {
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  for (const auto& r : records_) {
    if (seen.insert(r.source_clip_id).second) out.push_back(r.source_clip_id);
  }
  return out;
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  std::vector<FeatureRecord> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(records_.at(i));
  return Dataset(std::move(out), normalization_);
}

std::vector<double> Dataset::mos() const {
  std::vector<double> out;
  out.reserve(records_.size());
  for (const auto& r : records_) out.push_back(r.mos);
  return out;
}

Dataset parse_jsonl(std::istream& in) {
  std::vector<FeatureRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      FeatureRecord r = record_from_json(json::parse(line));
      validate_record(r);
      records.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw DataError("line " + std::to_string(line_no) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return Dataset(std::move(records));
}

Dataset load_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset '" + path.string() + "'");
  return parse_jsonl(in);
}

void write_jsonl(const Dataset& ds, std::ostream& out) {
  for (const auto& r : ds) out << record_to_json(r).dump() << '\n';
}

void save_jsonl(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write dataset '" + path.string() + "'");
  write_jsonl(ds, out);
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

Scale parse_scale(std::string_view name) {
  if (name == "mos5") return Scale::mos5;
  if (name == "pct100") return Scale::pct100;
  throw ConfigError("unknown scale '" + std::string(name) + "' (expected mos5 or pct100)");
}

std::string_view to_string(Scale s) { return s == Scale::mos5 ? "mos5" : "pct100"; }

double scale_min(Scale s) { return s == Scale::mos5 ? 1.0 : 0.0; }
double scale_max(Scale s) { return s == Scale::mos5 ? 5.0 : 100.0; }

double rescale_mos(double x, Scale from, Scale to) {
  const double lo = scale_min(from);
  const double hi = scale_max(from);
  if (!std::isfinite(x) || x < lo || x > hi) {
    throw DataError("rating " + std::to_string(x) + " outside " + std::string(to_string(from)) +
                    " range [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }
  if (from == to) return x;
  return scale_min(to) + (x - lo) / (hi - lo) * (scale_max(to) - scale_min(to));
}

ClipSplit split_by_clip(const Dataset& ds, std::size_t held_out_clips, std::uint64_t seed) {
  std::vector<std::string> clips = ds.clip_ids();
  if (held_out_clips >= clips.size() && !(held_out_clips == 0 && clips.empty())) {
    throw ConfigError("cannot hold out " + std::to_string(held_out_clips) + " of " +
                      std::to_string(clips.size()) + " source clips");
  }
  Rng rng(seed);
  std::shuffle(clips.begin(), clips.end(), rng.engine());
  std::unordered_set<std::string> test_clips(clips.begin(), clips.begin() + held_out_clips);
  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> test_idx;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    (test_clips.contains(ds[i].source_clip_id) ? test_idx : train_idx).push_back(i);
  }
  return {ds.subset(train_idx), ds.subset(test_idx)};
}

}  // namespace avq
