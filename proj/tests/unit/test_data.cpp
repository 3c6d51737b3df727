#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "../support.hpp"
#include "avq/data/dataset.hpp"
#include "avq/data/synth.hpp"
#include "avq/data/vmaf.hpp"
#include "avq/errors.hpp"

namespace avq {
namespace {

FeatureRecord make_record(const std::string& id, const std::string& clip, Rng& rng) {
  FeatureRecord r;
  r.stimulus_id = id;
  r.source_clip_id = clip;
  r.audio_feat = testing::random_vector(kAudioDim, rng);
  r.video_feat = testing::random_vector(kVideoDim, rng, 0, 1);
  r.q_a = rng.uniform(1, 5);
  r.q_v = rng.uniform(0, 100);
  r.audio_bitrate_kbps = 64;
  r.video_bitrate_mbps = 2;
  r.mos = rng.uniform(1, 5);
  return r;
}

Dataset make_dataset(std::size_t clips, std::size_t per_clip, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<FeatureRecord> recs;
  for (std::size_t c = 0; c < clips; ++c)
    for (std::size_t i = 0; i < per_clip; ++i)
      recs.push_back(make_record("c" + std::to_string(c) + "_" + std::to_string(i), "c" + std::to_string(c), rng));
  return Dataset(std::move(recs));
}

TEST(Jsonl, EmptyInputGivesEmptyDataset) {
  std::istringstream in("");
  EXPECT_EQ(parse_jsonl(in).size(), 0u);
}

TEST(Jsonl, RoundTripIsBitExact) {
  const Dataset ds = make_dataset(3, 2, 1);
  std::stringstream buf;
  write_jsonl(ds, buf);
  const Dataset back = parse_jsonl(buf);
  ASSERT_EQ(back.size(), ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) EXPECT_EQ(back[i], ds[i]);
}

TEST(Jsonl, ShortAudioVectorNamesLineAndArity) {
  const Dataset ds = make_dataset(1, 2, 2);
  std::stringstream buf;
  write_jsonl(ds, buf);
  std::string text = buf.str();
  auto second = nlohmann::json::parse(text.substr(text.find('\n') + 1));
  second["audio_feat"].erase(second["audio_feat"].begin());
  std::istringstream in(text.substr(0, text.find('\n') + 1) + second.dump() + "\n");
  try {
    parse_jsonl(in);
    FAIL();
  } catch (const DataError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("line 2"), std::string::npos) << msg;
    EXPECT_NE(msg.find("512"), std::string::npos) << msg;
  }
}

TEST(Jsonl, RejectsMissingFieldAndNonFinite) {
  std::istringstream missing(R"({"stimulus_id":"a"})" "\n");
  EXPECT_THROW(parse_jsonl(missing), DataError);
  Rng rng(3);
  FeatureRecord r = make_record("a", "c", rng);
  r.mos = 7.0;
  EXPECT_THROW(validate_record(r), DataError);
}

TEST(Dataset, RejectsDuplicateIds) {
  Rng rng(4);
  std::vector<FeatureRecord> recs{make_record("x", "c", rng), make_record("x", "c", rng)};
  EXPECT_THROW(Dataset(std::move(recs)), DataError);
}

TEST(Standardize, TwoValuesMapToMinusOnePlusOne) {
  Rng rng(5);
  FeatureRecord a = make_record("a", "c", rng), b = make_record("b", "c", rng);
  a.video_feat[0] = 0.0;
  b.video_feat[0] = 2.0;
  const Normalized n = standardize(Dataset({a, b}));
  EXPECT_DOUBLE_EQ(n.data[0].video_feat[0], -1.0);
  EXPECT_DOUBLE_EQ(n.data[1].video_feat[0], 1.0);
}

TEST(Standardize, MomentsMatchAccumulationOracle) {
  const Normalized n = standardize(make_dataset(20, 5, 6));
  for (std::size_t d : {std::size_t{0}, std::size_t{300}, kAudioDim + 2, kQvDim}) {
    double s = 0, s2 = 0;
    for (const auto& r : n.data) s += r.feature(d);
    const double mean = s / n.data.size();
    for (const auto& r : n.data) s2 += (r.feature(d) - mean) * (r.feature(d) - mean);
    EXPECT_NEAR(mean, 0.0, 1e-9);
    EXPECT_NEAR(std::sqrt(s2 / n.data.size()), 1.0, 1e-9);
  }
}

TEST(Standardize, IsIdempotent) {
  const Normalized once = standardize(make_dataset(4, 5, 7));
  const Normalized twice = standardize(once.data);
  for (std::size_t i = 0; i < once.data.size(); ++i)
    for (std::size_t d = 0; d < kFeatureDim; ++d)
      EXPECT_NEAR(once.data[i].feature(d), twice.data[i].feature(d), 1e-9);
}

TEST(Standardize, ZeroVarianceKeepsUnitSpread) {
  Dataset ds = make_dataset(1, 3, 8);  // bitrates are constant
  const Normalized n = standardize(ds);
  EXPECT_EQ(n.stats.spread[kAudioBitrateDim], 1.0);
  EXPECT_NE(std::find(n.stats.degenerate.begin(), n.stats.degenerate.end(), kAudioBitrateDim),
            n.stats.degenerate.end());
  EXPECT_EQ(n.data[0].audio_bitrate_kbps, 0.0);
  EXPECT_THROW(standardize(make_dataset(1, 1, 8)), DataError);
}

TEST(MinMax, MapsOntoUnitIntervalAndConstantToZero) {
  const Normalized n = minmax_normalize(make_dataset(5, 4, 9));
  for (std::size_t d = 0; d < kFeatureDim; ++d) {
    double lo = INFINITY, hi = -INFINITY;
    for (const auto& r : n.data) {
      lo = std::min(lo, r.feature(d));
      hi = std::max(hi, r.feature(d));
    }
    if (d == kAudioBitrateDim || d == kVideoBitrateDim) {
      EXPECT_EQ(lo, 0.0);
      EXPECT_EQ(hi, 0.0);
    } else {
      EXPECT_EQ(lo, 0.0);
      EXPECT_NEAR(hi, 1.0, 1e-15);
    }
  }
}

TEST(MinMax, OneAndFiveMapToZeroAndOne) {
  Rng rng(10);
  FeatureRecord a = make_record("a", "c", rng), b = make_record("b", "c", rng);
  a.q_a = 1.0;
  b.q_a = 5.0;
  const Normalized n = minmax_normalize(Dataset({a, b}));
  EXPECT_EQ(n.data[0].q_a, 0.0);
  EXPECT_EQ(n.data[1].q_a, 1.0);
}

TEST(RescaleMos, EndpointsMidpointAndRoundTrip) {
  EXPECT_EQ(rescale_mos(1.0, Scale::mos5, Scale::pct100), 0.0);
  EXPECT_EQ(rescale_mos(5.0, Scale::mos5, Scale::pct100), 100.0);
  EXPECT_EQ(rescale_mos(3.0, Scale::mos5, Scale::pct100), 50.0);
  Rng rng(11);
  for (int i = 0; i < 100; ++i) {
    const double x = rng.uniform(1, 5);
    EXPECT_NEAR(rescale_mos(rescale_mos(x, Scale::mos5, Scale::pct100), Scale::pct100, Scale::mos5), x, 1e-12);
  }
  EXPECT_THROW(rescale_mos(5.5, Scale::mos5, Scale::pct100), DataError);
  EXPECT_THROW(parse_scale("likert7"), ConfigError);
}

TEST(SplitByClip, PartitionsByClip) {
  const Dataset ds = make_dataset(65, 25, 12);
  const ClipSplit s = split_by_clip(ds, 5, 3);
  EXPECT_EQ(s.train.size(), 1500u);
  EXPECT_EQ(s.test.size(), 125u);
  std::set<std::string> train_clips, test_clips;
  for (const auto& r : s.train) train_clips.insert(r.source_clip_id);
  for (const auto& r : s.test) test_clips.insert(r.source_clip_id);
  for (const auto& c : test_clips) EXPECT_EQ(train_clips.count(c), 0u);
  EXPECT_EQ(test_clips.size(), 5u);
  EXPECT_EQ(split_by_clip(ds, 0, 3).test.size(), 0u);
  EXPECT_THROW(split_by_clip(ds, 65, 3), ConfigError);
}

nlohmann::json frame(double v) {
  nlohmann::json m;
  for (auto key : kVmafFeatureKeys) m[std::string(key)] = v;
  m["vmaf"] = 90.0;
  return {{"frameNum", 0}, {"metrics", m}};
}

TEST(Vmaf, SingleFrameAndTwoFrameMean) {
  const VideoFeatures single = pool_vmaf_frames({{"frames", {frame(0.25)}}});
  const VideoFeatures pair = pool_vmaf_frames({{"frames", {frame(0.0), frame(2.0)}}});
  for (std::size_t k = 0; k < kVideoDim; ++k) {
    EXPECT_EQ(single[k], 0.25);
    EXPECT_EQ(pair[k], 1.0);
  }
}

TEST(Vmaf, RandomFramesMatchSummationOracle) {
  Rng rng(13);
  nlohmann::json log = {{"frames", nlohmann::json::array()}};
  std::array<double, kVideoDim> sum{};
  for (int f = 0; f < 10; ++f) {
    nlohmann::json m;
    for (std::size_t k = 0; k < kVideoDim; ++k) {
      const double v = rng.uniform(0, 20);
      m["integer_" + std::string(kVmafFeatureKeys[k])] = v;
      sum[k] += v;
    }
    log["frames"].push_back({{"metrics", m}});
  }
  const VideoFeatures pooled = pool_vmaf_frames(log);
  for (std::size_t k = 0; k < kVideoDim; ++k) EXPECT_NEAR(pooled[k], sum[k] / 10.0, 1e-12);
}

TEST(Vmaf, ErrorsNameTheProblem) {
  EXPECT_THROW(pool_vmaf_frames({{"frames", nlohmann::json::array()}}), DataError);
  nlohmann::json f = frame(1.0);
  f["metrics"].erase("motion2");
  try {
    pool_vmaf_frames({{"frames", {f}}});
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("motion2"), std::string::npos);
  }
}

TEST(Synth, PaperShapedCorpusHas1625Records) {
  const Dataset ds = synth_generate(SynthSpec{}, 0);
  EXPECT_EQ(ds.size(), 1625u);
  EXPECT_EQ(ds.clip_ids().size(), 65u);
  for (const auto& r : ds) EXPECT_NO_THROW(validate_record(r));
}

TEST(Synth, SingleCellAndDeterminism) {
  SynthSpec spec;
  spec.n_clips = 1;
  spec.audio_ladder_kbps = {64};
  spec.video_ladder_mbps = {2};
  EXPECT_EQ(synth_generate(spec, 5).size(), 1u);
  const Dataset a = synth_generate(SynthSpec{}, 9), b = synth_generate(SynthSpec{}, 9);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], b[i]);
}

TEST(Synth, NoiselessMosIsRecomputableFromRecordFields) {
  SynthSpec spec;
  spec.n_clips = 6;
  const Dataset ds = synth_generate(spec, 3);
  for (const auto& r : ds) {
    const double qa_n = (r.q_a - 1) / 4, qv_n = r.q_v / 100;
    EXPECT_NEAR(r.mos, 1 + 4 * (0.3 * qa_n + 0.7 * qv_n), 1e-12);
  }
}

TEST(Synth, LinearProbeReconstructsAudioScore) {
  SynthSpec spec;
  spec.n_clips = 4;
  const Dataset ds = synth_generate(spec, 21);
  const auto probe = audio_probe(spec, 21);
  for (const auto& r : ds) {
    EXPECT_NEAR(std::inner_product(probe.begin(), probe.end(), r.audio_feat.begin(), 0.0), r.q_a, 1e-9);
  }
}

}  // namespace
}  // namespace avq
