#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "avq/cli/commands.hpp"
#include "avq/cli/run_config.hpp"
#include "avq/errors.hpp"

namespace avq {
namespace {
namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("avq_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

RunConfig tiny(const fs::path& out) {
  RunConfig c;
  c.seed = 5;
  c.out = out.string();
  c.synth.n_clips = 5;
  c.synth.audio_ladder_kbps = {16, 96};
  c.synth.video_ladder_mbps = {0.5, 4};
  c.synth.noise_sigma = 0.1;
  c.held_out_clips = 1;
  c.train.folds = 2;
  c.train.max_epochs = 1;
  c.baseline.svr = {SvrFeatureSet::f2};
  c.baseline.svr_C = {1, 10};
  c.baseline.svr_gamma = {1};
  c.baseline.svr_folds = 2;
  return c;
}

TEST(RunConfigTest, RejectsUnknownKeysAndTrainSeed) {
  RunConfig c;
  EXPECT_THROW(apply_json(nlohmann::json{{"sede", 1}}, c), ConfigError);
  EXPECT_THROW(apply_json(nlohmann::json{{"model", {{"layers", 2}}}}, c), ConfigError);
  EXPECT_THROW(apply_json(nlohmann::json{{"train", {{"seed", 2}}}}, c), ConfigError);
  EXPECT_THROW(apply_json(nlohmann::json{{"baseline", {{"svr", {"9F"}}}}}, c), ConfigError);
  EXPECT_THROW(apply_json(nlohmann::json{{"scale", "likert"}}, c), ConfigError);
  EXPECT_THROW(apply_json(nlohmann::json{{"seed", "abc"}}, c), ConfigError);
}

TEST(RunConfigTest, RoundTripsThroughJson) {
  RunConfig c = tiny("x");
  c.explain = {0.8, 0.2};
  RunConfig back;
  apply_json(to_json(c), back);
  EXPECT_EQ(to_json(back), to_json(c));
}

TEST(RunConfigTest, StageSeedsDiffer) {
  EXPECT_NE(stage_seed(1, Stage::generate), stage_seed(1, Stage::train));
  EXPECT_EQ(stage_seed(1, Stage::split), stage_seed(1, Stage::split));
}

TEST(Generate, SingleCellAndDeterminism) {
  const fs::path dir = scratch("generate");
  RunConfig c = tiny(dir / "a");
  c.synth.n_clips = 1;
  c.synth.audio_ladder_kbps = {64};
  c.synth.video_ladder_mbps = {2};
  std::ostringstream log;
  cmd_generate(c, log);
  EXPECT_EQ(load_jsonl(dir / "a" / "dataset.jsonl").size(), 1u);
  EXPECT_TRUE(fs::exists(dir / "a" / "effective_config.json"));

  c = tiny(dir / "b");
  cmd_generate(c, log);
  c.out = (dir / "c").string();
  cmd_generate(c, log);
  EXPECT_EQ(slurp(dir / "b" / "dataset.jsonl"), slurp(dir / "c" / "dataset.jsonl"));
}

class Pipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = scratch("pipeline");
    RunConfig c = tiny(dir_ / "gen");
    std::ostringstream log;
    cmd_generate(c, log);
    c.dataset = (dir_ / "gen" / "dataset.jsonl").string();
    c.out = (dir_ / "train").string();
    cmd_train(c, train_log_);
  }
  RunConfig config(const std::string& out) const {
    RunConfig c = tiny(dir_ / out);
    c.dataset = (dir_ / "gen" / "dataset.jsonl").string();
    c.checkpoint = (dir_ / "train" / "model.ckpt").string();
    return c;
  }
  static inline fs::path dir_;
  static inline std::ostringstream train_log_;
};

TEST_F(Pipeline, TrainEchoesDefaultsAndSummarizesEveryFold) {
  const std::string log = train_log_.str();
  EXPECT_NE(log.find("lambda=0.6 lr=0.0001 heads=4 dropout=0.6"), std::string::npos) << log;
  const auto summary = nlohmann::json::parse(slurp(dir_ / "train" / "cv_summary.json"));
  EXPECT_EQ(summary["folds"].size(), 2u);
  EXPECT_TRUE(fs::exists(dir_ / "train" / "fold1.ckpt"));
  EXPECT_TRUE(fs::exists(dir_ / "train" / "fold0_history.csv"));
  EXPECT_EQ(load_jsonl(dir_ / "train" / "test.jsonl").size(), 4u);
}

TEST_F(Pipeline, TrainRerunGivesIdenticalSummary) {
  RunConfig c = config("train_again");
  std::ostringstream log;
  cmd_train(c, log);
  EXPECT_EQ(slurp(dir_ / "train" / "cv_summary.json"), slurp(dir_ / "train_again" / "cv_summary.json"));
}

TEST_F(Pipeline, EvaluateWritesReportOnRequestedScale) {
  RunConfig c = config("eval");
  c.scale = Scale::pct100;
  std::ostringstream log;
  cmd_evaluate(c, log);
  const auto report = nlohmann::json::parse(slurp(dir_ / "eval" / "report.json"));
  EXPECT_EQ(report.size(), 5u);
  EXPECT_EQ(report["scale"], "pct100");
  EXPECT_EQ(report["n"], 20);
  EXPECT_TRUE(fs::exists(dir_ / "eval" / "predictions.csv"));
}

TEST_F(Pipeline, PredictWritesOneRowPerRecord) {
  RunConfig c = config("predict");
  std::ostringstream log;
  cmd_predict(c, log);
  const std::string csv = slurp(dir_ / "predict" / "predictions.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 21);
}

TEST_F(Pipeline, ExplainRowsMatchCorpus) {
  RunConfig c = config("explain");
  std::ostringstream log;
  cmd_explain(c, log);
  const std::string csv = slurp(dir_ / "explain" / "importance.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 21);
  const auto summary = nlohmann::json::parse(slurp(dir_ / "explain" / "importance_summary.json"));
  EXPECT_TRUE(summary["mean_i_final"].contains("audio"));
}

TEST_F(Pipeline, ExplainOnIdenticalRecordsGivesIdenticalRows) {
  const Dataset ds = load_jsonl(dir_ / "gen" / "dataset.jsonl");
  std::vector<FeatureRecord> same;
  for (int i = 0; i < 3; ++i) {
    FeatureRecord r = ds[0];
    r.stimulus_id = "dup" + std::to_string(i);
    same.push_back(r);
  }
  save_jsonl(Dataset(same), dir_ / "same.jsonl");
  RunConfig c = config("explain_same");
  c.dataset = (dir_ / "same.jsonl").string();
  std::ostringstream log;
  cmd_explain(c, log);
  std::istringstream csv(slurp(dir_ / "explain_same" / "importance.csv"));
  std::string line;
  std::getline(csv, line);
  std::vector<std::string> values;
  while (std::getline(csv, line)) values.push_back(line.substr(line.find(',')));
  ASSERT_EQ(values.size(), 3u);
  EXPECT_EQ(values[0], values[1]);
  EXPECT_EQ(values[0], values[2]);
  const auto summary = nlohmann::json::parse(slurp(dir_ / "explain_same" / "importance_summary.json"));
  const double a = summary["mean_i_final"]["audio"].get<double>();
  const double v = summary["mean_i_final"]["video"].get<double>();
  EXPECT_TRUE((a == 1.0 && v == 0.0) || (a == 0.0 && v == 1.0)) << a << " " << v;
}

TEST_F(Pipeline, EvaluateAgainstItsOwnPredictionsHasZeroRmse) {
  RunConfig c = config("own_predict");
  std::ostringstream log;
  cmd_predict(c, log);
  std::istringstream csv(slurp(dir_ / "own_predict" / "predictions.csv"));
  std::string line;
  std::getline(csv, line);
  std::vector<FeatureRecord> records = load_jsonl(dir_ / "gen" / "dataset.jsonl").records();
  for (auto& r : records) {
    ASSERT_TRUE(std::getline(csv, line));
    ASSERT_EQ(line.substr(0, line.find(',')), r.stimulus_id);
    r.mos = std::stod(line.substr(line.find(',') + 1));
  }
  save_jsonl(Dataset(records), dir_ / "own.jsonl");
  c = config("own_eval");
  c.dataset = (dir_ / "own.jsonl").string();
  cmd_evaluate(c, log);
  const auto report = nlohmann::json::parse(slurp(dir_ / "own_eval" / "report.json"));
  EXPECT_EQ(report["rmse"].get<double>(), 0.0);
  EXPECT_NEAR(report["r_p"].get<double>(), 1.0, 1e-12);
}

TEST(Baseline, TableRowsAndOptimizedBeatsGuessOnPlantedData) {
  const fs::path dir = scratch("baseline");
  RunConfig c = tiny(dir / "gen");
  c.synth.n_clips = 12;
  c.synth.noise_sigma = 0.0;
  c.synth.form = PlantedForm::product;
  c.synth.w_a = 0.6;
  c.synth.w_v = 0.5;
  c.held_out_clips = 3;
  std::ostringstream log;
  cmd_generate(c, log);
  c.dataset = (dir / "gen" / "dataset.jsonl").string();
  c.out = (dir / "base").string();
  c.baseline.svr = {SvrFeatureSet::f2, SvrFeatureSet::f8};
  cmd_baseline(c, log);
  const auto j = nlohmann::json::parse(slurp(dir / "base" / "baseline.json"));
  const auto& rows = j["rows"];
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0]["method"], "Q-guess");
  EXPECT_EQ(rows[0]["w_a"], 0.3);
  EXPECT_EQ(rows[0]["w_v"], 0.7);
  EXPECT_EQ(rows[2]["method"], "SVR-2F");
  EXPECT_EQ(rows[3]["method"], "SVR-8F");
  EXPECT_LT(rows[1]["rmse"].get<double>(), rows[0]["rmse"].get<double>());
  EXPECT_NE(log.str().find("Q-guess (w_a=0.3, w_v=0.7)"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "base" / "svr_8F.json"));
}

int run_binary(const std::string& args) {
  const std::string cmd = std::string(AVQ_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(ExitCodes, ConfigDataAndSuccess) {
  const fs::path dir = scratch("exit");
  std::ofstream(dir / "bad.json") << R"({"unknown": 1})";
  std::ofstream(dir / "ok.json") << R"({"synth": {"n_clips": 1, "audio_ladder_kbps": [64], "video_ladder_mbps": [2]}})";
  EXPECT_EQ(run_binary("generate --config " + (dir / "bad.json").string()), kExitConfig);
  EXPECT_EQ(run_binary("frobnicate"), kExitConfig);
  EXPECT_EQ(run_binary("evaluate --out " + (dir / "e").string() + " --checkpoint " + (dir / "none.ckpt").string() +
                       " --dataset " + (dir / "none.jsonl").string()),
            kExitData);
  EXPECT_EQ(run_binary("generate --config " + (dir / "ok.json").string() + " --out " + (dir / "g").string()), kExitOk);
  EXPECT_EQ(run_binary("train --scale nope"), kExitConfig);
}

TEST(ExitCodes, NumericFailureMapsToFour) {
  try {
    throw NumericError("x");
  } catch (...) {
    EXPECT_EQ(exit_code_for_current_exception(), kExitNumeric);
  }
  try {
    throw ContractError("x");
  } catch (...) {
    EXPECT_EQ(exit_code_for_current_exception(), kExitData);
  }
}

}  // namespace
}  // namespace avq
