#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace avq {

inline constexpr std::size_t kAudioDim = 512;  // GML penultimate embedding
inline constexpr std::size_t kVideoDim = 6;    // vif_scale0..3, motion2, adm
/// q_a, q_v, audio_bitrate_kbps, video_bitrate_mbps
inline constexpr std::size_t kAuxDim = 4;
inline constexpr std::size_t kFeatureDim = kAudioDim + kVideoDim + kAuxDim;

inline constexpr std::size_t kQaDim = kAudioDim + kVideoDim;
inline constexpr std::size_t kQvDim = kQaDim + 1;
inline constexpr std::size_t kAudioBitrateDim = kQaDim + 2;
inline constexpr std::size_t kVideoBitrateDim = kQaDim + 3;

/// One stimulus: unimodal features and scores for an encoded clip plus its MOS.
struct FeatureRecord {
  std::string stimulus_id;
  std::string source_clip_id;
  std::vector<double> audio_feat;  // length kAudioDim
  std::vector<double> video_feat;  // length kVideoDim
  double q_a = 0.0;                // GML score
  double q_v = 0.0;                // VMAF score, 0-100
  double audio_bitrate_kbps = 0.0;
  double video_bitrate_mbps = 0.0;
  double mos = 0.0;  // 5-point scale

  /// Flat feature index: audio, then video, then the kAuxDim scalars.
  double feature(std::size_t dim) const;
  double& feature(std::size_t dim);

  friend bool operator==(const FeatureRecord&, const FeatureRecord&) = default;
};

/// Checks arity, finiteness and value ranges of a raw (unnormalized) record.
/// Throws DataError describing the first violation.
void validate_record(const FeatureRecord& record);

enum class NormKind { standard, minmax };

/// Per-dimension affine statistics over all kFeatureDim dimensions:
/// x' = (x - center) / spread. For `standard` these are mean and population
/// std; for `minmax` they are min and (max - min).
struct FeatureStats {
  NormKind kind = NormKind::standard;
  std::vector<double> center;
  std::vector<double> spread;
  /// Dimensions with zero spread. Standardization substitutes std 1; min-max
  /// keeps span 0 and maps every value to 0.
  std::vector<std::size_t> degenerate;

  double apply(std::size_t dim, double x) const;
  FeatureRecord apply(const FeatureRecord& record) const;

  friend bool operator==(const FeatureStats&, const FeatureStats&) = default;
};

class Dataset {
 public:
  Dataset() = default;
  /// Enforces unique stimulus ids and vector arities (not value ranges).
  explicit Dataset(std::vector<FeatureRecord> records,
                   std::optional<FeatureStats> normalization = std::nullopt);

  const std::vector<FeatureRecord>& records() const noexcept { return records_; }
  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }
  const FeatureRecord& operator[](std::size_t i) const { return records_[i]; }
  auto begin() const noexcept { return records_.begin(); }
  auto end() const noexcept { return records_.end(); }

  const std::optional<FeatureStats>& normalization() const noexcept { return normalization_; }

  /// Distinct source clip ids in order of first appearance.
  std::vector<std::string> clip_ids() const;
  Dataset subset(std::span<const std::size_t> indices) const;
  std::vector<double> mos() const;

 private:
  std::vector<FeatureRecord> records_;
  std::optional<FeatureStats> normalization_;
};

Dataset parse_jsonl(std::istream& in);
Dataset load_jsonl(const std::filesystem::path& path);
void write_jsonl(const Dataset& ds, std::ostream& out);
void save_jsonl(const Dataset& ds, const std::filesystem::path& path);

struct Normalized {
  Dataset data;
  FeatureStats stats;
};

FeatureStats fit_standard_stats(const Dataset& ds);
FeatureStats fit_minmax_stats(const Dataset& ds);
/// Applies `stats` to every record; the result carries `stats` as its state.
Dataset apply_stats(const Dataset& ds, const FeatureStats& stats);

/// Zero mean, unit population std per dimension. Zero-variance dimensions
/// keep std 1 and are reported as a warning. Requires >= 2 records.
Normalized standardize(const Dataset& ds);
/// Maps each dimension onto [0, 1]; constant dimensions map to 0.
Normalized minmax_normalize(const Dataset& ds);

enum class Scale { mos5, pct100 };

Scale parse_scale(std::string_view name);
std::string_view to_string(Scale s);
double scale_min(Scale s);
double scale_max(Scale s);

/// Affine map between rating scales ([1,5] <-> [0,100]). RangeError
/// (DataError) when `x` lies outside the source scale.
double rescale_mos(double x, Scale from, Scale to);

struct ClipSplit {
  Dataset train;
  Dataset test;
};

/// Holds out `held_out_clips` whole source clips (chosen by seeded shuffle)
/// as the test partition.
ClipSplit split_by_clip(const Dataset& ds, std::size_t held_out_clips, std::uint64_t seed);

}  // namespace avq
