#include <cmath>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "../support.hpp"
#include "avq/data/synth.hpp"
#include "avq/errors.hpp"
#include "avq/train/adamw.hpp"
#include "avq/train/kfold.hpp"
#include "avq/train/loss.hpp"
#include "avq/train/trainer.hpp"

namespace avq {
namespace {

using testing::random_vector;

double oracle_ccc(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i] / n;
    my += y[i] / n;
  }
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my) / n;
    sxx += (x[i] - mx) * (x[i] - mx) / n;
    syy += (y[i] - my) * (y[i] - my) / n;
  }
  return 2 * sxy / (sxx + syy + (mx - my) * (mx - my));
}

double oracle_rmse(const std::vector<double>& x, const std::vector<double>& y) {
  double s = 0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
  return std::sqrt(s / x.size());
}

TEST(Ccc, PerfectMirrorAndOracle) {
  Rng rng(1);
  const auto t = random_vector(20, rng, 1, 5);
  EXPECT_NEAR(ccc(t, t), 1.0, 1e-15);
  double mean = 0;
  for (double v : t) mean += v / t.size();
  std::vector<double> mirror;
  for (double v : t) mirror.push_back(-v + 2 * mean);
  const double m = ccc(mirror, t);
  EXPECT_LT(m, 0.0);
  EXPECT_GE(m, -1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const auto x = random_vector(30, rng), y = random_vector(30, rng);
    EXPECT_NEAR(ccc(x, y), oracle_ccc(x, y), 1e-12);
  }
}

TEST(Ccc, DegenerateCases) {
  const std::vector<double> c{2, 2, 2};
  EXPECT_EQ(ccc(c, c), 0.0);
  EXPECT_THROW(ccc(std::vector<double>{1}, std::vector<double>{1}), ContractError);
  EXPECT_THROW(ccc(std::vector<double>{1, 2}, std::vector<double>{1, 2, 3}), ContractError);
}

TEST(CompositeLoss, EndpointsAndHandExample) {
  Rng rng(2);
  const auto t = random_vector(10, rng, 1, 5), p = random_vector(10, rng, 1, 5);
  EXPECT_EQ(composite_loss(t, t, 1.0).loss, 0.0);
  EXPECT_EQ(composite_loss(p, t, 0.0).loss, composite_loss(p, t, 0.0).rmse);
  EXPECT_NEAR(composite_loss(p, t, 0.0).loss, oracle_rmse(p, t), 1e-14);
  const std::vector<double> hp{1.0, 2.5, 3.0, 4.5}, ht{1.5, 2.0, 3.5, 4.0};
  const double expect = 0.6 * (1 - oracle_ccc(hp, ht)) + 0.4 * oracle_rmse(hp, ht);
  EXPECT_NEAR(composite_loss(hp, ht, 0.6).loss, expect, 1e-14);
  EXPECT_THROW(composite_loss(hp, ht, 1.5), ConfigError);
}

TEST(CompositeLoss, EndpointMixIsAdditive) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = random_vector(8, rng, 1, 5), t = random_vector(8, rng, 1, 5);
    const LossParts parts = composite_loss(p, t, 0.5);
    EXPECT_NEAR(composite_loss(p, t, 1.0).loss + composite_loss(p, t, 0.0).loss, (1 - parts.ccc) + parts.rmse,
                1e-14);
  }
}

TEST(CompositeLoss, TapeGradientMatchesFiniteDifferences) {
  Rng rng(4);
  const auto target = random_vector(6, rng, 1, 5);
  for (double lambda : {0.0, 0.6, 1.0}) {
    Matrix p(6, 1);
    for (std::size_t i = 0; i < 6; ++i) p[i] = rng.uniform(1, 5);
    const double err = testing::max_gradient_error(
        {p}, [&](Tape&, const std::vector<Var>& v) { return composite_loss(v[0], target, lambda); });
    EXPECT_LT(err, 1e-7) << lambda;
  }
}

TEST(AdamW, ZeroGradientBehaviour) {
  Rng rng(5);
  Matrix p = testing::random_matrix(3, 3, rng);
  const Matrix original = p;
  Matrix* params[] = {&p};
  const Matrix zero(3, 3);
  const Matrix* grads[] = {&zero};
  OptimizerState state;
  adamw_step(params, grads, state, {1e-3, 0.0, 0.9, 0.999, 1e-8});
  EXPECT_EQ(p, original);
  EXPECT_EQ(state.step, 1u);
  adamw_step(params, grads, state, {1e-3, 0.5, 0.9, 0.999, 1e-8});
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_EQ(p[i], original[i] * (1.0 - 1e-3 * 0.5));
}

TEST(AdamW, FirstStepMatchesScalarOracle) {
  Matrix p(1, 1, 0.5);
  Matrix g(1, 1, 1.0);
  Matrix* params[] = {&p};
  const Matrix* grads[] = {&g};
  OptimizerState state;
  const AdamWConfig cfg;
  adamw_step(params, grads, state, cfg);
  // m = 0.1, v = 0.001; bias correction gives m_hat = v_hat = 1.
  const double m_hat = (0.1 * 1.0) / (1 - 0.9), v_hat = (0.001 * 1.0) / (1 - 0.999);
  const double expect = 0.5 * (1 - cfg.lr * cfg.weight_decay) - cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
  EXPECT_NEAR(p(0, 0), expect, 1e-16);
}

TEST(AdamW, StepDecreasesConvexQuadratic) {
  Rng rng(6);
  const Matrix c = testing::random_matrix(4, 1, rng);
  Matrix x = testing::random_matrix(4, 1, rng);
  auto f = [&] {
    double s = 0;
    for (std::size_t i = 0; i < 4; ++i) s += (x[i] - c[i]) * (x[i] - c[i]);
    return s;
  };
  OptimizerState state;
  Matrix* params[] = {&x};
  for (int step = 0; step < 10; ++step) {
    Matrix g(4, 1);
    for (std::size_t i = 0; i < 4; ++i) g[i] = 2 * (x[i] - c[i]);
    const Matrix* grads[] = {&g};
    const double before = f();
    adamw_step(params, grads, state, {1e-4, 0.0, 0.9, 0.999, 1e-8});
    EXPECT_LT(f(), before);
  }
}

TEST(AdamW, ShapeMismatchIsContractError) {
  Matrix p(2, 2), g(2, 3);
  Matrix* params[] = {&p};
  const Matrix* grads[] = {&g};
  OptimizerState state;
  EXPECT_THROW(adamw_step(params, grads, state, {}), ContractError);
}

Dataset clip_dataset(std::size_t clips, std::size_t audio, std::size_t video, std::uint64_t seed) {
  SynthSpec s;
  s.n_clips = clips;
  s.audio_ladder_kbps.resize(audio);
  s.video_ladder_mbps.resize(video);
  for (std::size_t i = 0; i < audio; ++i) s.audio_ladder_kbps[i] = 16.0 * (i + 1);
  for (std::size_t i = 0; i < video; ++i) s.video_ladder_mbps[i] = 0.5 * (i + 1);
  return synth_generate(s, seed);
}

TEST(KFold, SixtyFiveClipsIntoFiveFoldsOfThirteen) {
  const Dataset ds = clip_dataset(65, 1, 2, 7);
  const auto folds = kfold_split(ds, 5, 3);
  ASSERT_EQ(folds.size(), 5u);
  std::multiset<std::size_t> seen;
  for (const auto& f : folds) {
    std::set<std::string> val_clips, train_clips;
    for (auto i : f.validation) val_clips.insert(ds[i].source_clip_id);
    for (auto i : f.train) train_clips.insert(ds[i].source_clip_id);
    EXPECT_EQ(val_clips.size(), 13u);
    for (const auto& c : val_clips) EXPECT_EQ(train_clips.count(c), 0u);
    EXPECT_EQ(f.train.size() + f.validation.size(), ds.size());
    seen.insert(f.validation.begin(), f.validation.end());
  }
  EXPECT_EQ(seen.size(), ds.size());
  EXPECT_EQ(std::set<std::size_t>(seen.begin(), seen.end()).size(), ds.size());
}

TEST(KFold, DeterministicAndValidated) {
  const Dataset ds = clip_dataset(7, 1, 1, 8);
  const auto a = kfold_split(ds, 3, 1), b = kfold_split(ds, 3, 1);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(a[k].validation, b[k].validation);
  for (const auto& f : a) EXPECT_GE(f.validation.size(), 2u);
  EXPECT_THROW(kfold_split(ds, 8, 1), ConfigError);
  EXPECT_THROW(kfold_split(ds, 1, 1), ConfigError);
}

ModelConfig tiny_model() {
  ModelConfig c;
  c.d_model = 8;
  c.heads = 2;
  c.heads_joint = 2;
  c.d_ff = 8;
  c.dropout = 0.2;
  return c;
}

TrainingSet tiny_set(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  TrainingSet s;
  s.input = testing::random_input(tiny_model(), n, 1, rng);
  for (std::size_t i = 0; i < n; ++i) s.target.push_back(3.0 + s.input.audio(i, 0) + 0.5 * s.input.video(i, 1));
  return s;
}

TEST(Fit, SameSeedGivesIdenticalHistory) {
  const TrainingSet train = tiny_set(40, 9), val = tiny_set(12, 10);
  TrainConfig tc;
  tc.max_epochs = 15;
  tc.batch_size = 8;
  tc.lr = 1e-3;
  tc.seed = 3;
  const FitResult a = fit(train, &val, tiny_model(), tc), b = fit(train, &val, tiny_model(), tc);
  ASSERT_EQ(a.history.size(), b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    EXPECT_EQ(a.history[i].train_loss, b.history[i].train_loss);
    EXPECT_EQ(a.history[i].val_loss, b.history[i].val_loss);
  }
}

TEST(Fit, PatienceZeroStopsAtFirstNonImprovement) {
  const TrainingSet train = tiny_set(40, 11), val = tiny_set(12, 12);
  TrainConfig tc;
  tc.max_epochs = 500;
  tc.patience = 0;
  tc.batch_size = 8;
  tc.lr = 3e-3;
  const FitResult r = fit(train, &val, tiny_model(), tc);
  ASSERT_TRUE(r.stopped_early);
  ASSERT_GE(r.history.size(), 2u);
  const auto& h = r.history;
  for (std::size_t i = 1; i + 1 < h.size(); ++i) EXPECT_LT(h[i].val_loss, h[i - 1].val_loss);
  EXPECT_GE(h.back().val_loss, h[h.size() - 2].val_loss);
  EXPECT_EQ(r.best_epoch, h.size() - 1);
}

TEST(Fit, NonFiniteLossNamesEpochAndBatch) {
  TrainingSet train = tiny_set(16, 13);
  train.target[3] = std::nan("");
  TrainConfig tc;
  tc.max_epochs = 2;
  tc.batch_size = 8;
  try {
    fit(train, nullptr, tiny_model(), tc);
    FAIL();
  } catch (const NumericError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("epoch 1"), std::string::npos) << msg;
    EXPECT_NE(msg.find("batch"), std::string::npos) << msg;
  }
}

TEST(Fit, HistoryCsvHeader) {
  std::ostringstream out;
  write_history_csv({{1, 0.5, 0.4, 0.9, 0.3}}, out);
  EXPECT_EQ(out.str().substr(0, out.str().find('\n')), "epoch,train_loss,val_loss,val_ccc,val_rmse");
}

TEST(TrainConfigTest, JsonRejectsUnknownKeys) {
  TrainConfig c;
  EXPECT_THROW(from_json(nlohmann::json{{"learning_rate", 1}}, c), ConfigError);
  nlohmann::json j = TrainConfig{};
  TrainConfig back;
  from_json(j, back);
  EXPECT_EQ(back, TrainConfig{});
  c.lambda = 2;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(CrossValidate, OneResultPerFold) {
  const Dataset ds = clip_dataset(6, 2, 2, 14);
  ModelConfig m;
  m.variant = Variant::no_attention;
  m.d_ff = 16;
  TrainConfig tc;
  tc.folds = 3;
  tc.max_epochs = 2;
  tc.batch_size = 8;
  const CrossValidationResult cv = cross_validate(ds, m, tc);
  ASSERT_EQ(cv.folds.size(), 3u);
  for (const auto& f : cv.folds) {
    EXPECT_EQ(f.validation.n, 8u);
    EXPECT_EQ(f.fit.history.size(), 2u);
  }
}

}  // namespace
}  // namespace avq
