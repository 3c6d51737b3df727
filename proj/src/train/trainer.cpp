#include "avq/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "avq/errors.hpp"
#include "avq/tensor/rng.hpp"
#include "avq/train/kfold.hpp"
#include "avq/train/loss.hpp"

namespace avq {
namespace {

constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kShuffleStream = 2;
constexpr std::uint64_t kDropoutStream = 3;
constexpr std::uint64_t kFoldStream = 4;

std::vector<std::vector<std::size_t>> make_batches(std::vector<std::size_t> order, std::size_t batch_size) {
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < order.size(); i += batch_size) {
    const std::size_t end = std::min(order.size(), i + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  // A single-record batch has no defined concordance; fold it into its neighbour.
  if (batches.size() > 1 && batches.back().size() == 1) {
    batches[batches.size() - 2].push_back(batches.back().front());
    batches.pop_back();
  }
  return batches;
}

LossParts evaluate_set(const FusionNetParams& params, const TrainingSet& set, double lambda) {
  const std::vector<double> pred = predict(params, set.input);
  for (double p : pred) {
    if (!std::isfinite(p)) throw NumericError("non-finite prediction during evaluation");
  }
  return composite_loss(pred, set.target, lambda);
}

void copy_values(const FusionNetParams& from, FusionNetParams& to) {
  auto src = from.tensors();
  auto dst = to.tensors();
  for (std::size_t i = 0; i < src.size(); ++i) *dst[i].second = *src[i].second;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("lambda must lie in [0, 1]");
  if (!(lr > 0.0) || !(weight_decay >= 0.0)) throw ConfigError("lr must be positive and weight_decay non-negative");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(eps > 0.0)) {
    throw ConfigError("AdamW betas must lie in [0, 1) and eps must be positive");
  }
  if (batch_size < 2) throw ConfigError("batch_size must be at least 2");
  if (folds < 2) throw ConfigError("folds must be at least 2");
  if (max_epochs == 0) throw ConfigError("max_epochs must be positive");
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"lambda", c.lambda},
                     {"lr", c.lr},
                     {"weight_decay", c.weight_decay},
                     {"beta1", c.beta1},
                     {"beta2", c.beta2},
                     {"eps", c.eps},
                     {"batch_size", c.batch_size},
                     {"folds", c.folds},
                     {"max_epochs", c.max_epochs},
                     {"patience", c.patience},
                     {"seed", c.seed},
                     {"target_train_rmse", c.target_train_rmse},
                     {"standardize_on_all", c.standardize_on_all},
                     {"log_every", c.log_every}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  if (!j.is_object()) throw ConfigError("train config must be an object");
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "lambda") c.lambda = value.get<double>();
      else if (key == "lr") c.lr = value.get<double>();
      else if (key == "weight_decay") c.weight_decay = value.get<double>();
      else if (key == "beta1") c.beta1 = value.get<double>();
      else if (key == "beta2") c.beta2 = value.get<double>();
      else if (key == "eps") c.eps = value.get<double>();
      else if (key == "batch_size") c.batch_size = value.get<std::size_t>();
      else if (key == "folds") c.folds = value.get<std::size_t>();
      else if (key == "max_epochs") c.max_epochs = value.get<std::size_t>();
      else if (key == "patience") c.patience = value.get<std::size_t>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "target_train_rmse") c.target_train_rmse = value.get<double>();
      else if (key == "standardize_on_all") c.standardize_on_all = value.get<bool>();
      else if (key == "log_every") c.log_every = value.get<std::size_t>();
      else throw ConfigError("unknown train config key '" + key + "'");
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("train config key '" + key + "': " + e.what());
    }
  }
}

TrainingSet TrainingSet::gather(std::span<const std::size_t> indices) const {
  const std::size_t n = input.seq_len;
  TrainingSet out;
  out.input.seq_len = n;
  out.input.audio = Matrix(indices.size() * n, input.audio.cols());
  out.input.video = Matrix(indices.size() * n, input.video.cols());
  out.target.reserve(indices.size());
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const std::size_t src = indices[b];
    for (std::size_t t = 0; t < n; ++t) {
      auto a = input.audio.row(src * n + t);
      std::copy(a.begin(), a.end(), out.input.audio.row(b * n + t).begin());
      auto v = input.video.row(src * n + t);
      std::copy(v.begin(), v.end(), out.input.video.row(b * n + t).begin());
    }
    out.target.push_back(target[src]);
  }
  return out;
}

TrainingSet to_training_set(const Dataset& ds) {
  TrainingSet set;
  set.input.seq_len = 1;
  set.input.audio = Matrix(ds.size(), kAudioDim);
  set.input.video = Matrix(ds.size(), kVideoDim);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    std::copy(ds[i].audio_feat.begin(), ds[i].audio_feat.end(), set.input.audio.row(i).begin());
    std::copy(ds[i].video_feat.begin(), ds[i].video_feat.end(), set.input.video.row(i).begin());
    set.target.push_back(ds[i].mos);
  }
  return set;
}

FitResult fit(const TrainingSet& train, const TrainingSet* validation, const ModelConfig& model,
              const TrainConfig& config) {
  model.validate();
  config.validate();
  if (train.size() < 2) throw DataError("training needs at least 2 records");
  if (validation && validation->size() < 2) throw DataError("validation needs at least 2 records");

  const Rng root(config.seed);
  FitResult result;
  result.params = init_params(model, root.split(kInitStream).seed());
  FusionNetParams& params = result.params;
  FusionNetParams best = params;
  Rng shuffle_rng = root.split(kShuffleStream);
  Rng dropout_rng = root.split(kDropoutStream);
  OptimizerState state;
  const AdamWConfig opt = config.optimizer();

  std::vector<Matrix*> tensors;
  for (auto& [name, t] : params.tensors()) tensors.push_back(t);

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  result.best_val_loss = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng.engine());
    const auto batches = make_batches(order, config.batch_size);
    double loss_sum = 0.0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const TrainingSet batch = train.gather(batches[b]);
      Tape tape;
      const BoundParams bound = bind(tape, params);
      ForwardOptions fo;
      fo.mode = Mode::train;
      fo.rng = &dropout_rng;
      const ForwardTrace tr = forward(tape, bound, model, batch.input, fo);
      const Var loss = composite_loss(tr.prediction, batch.target, config.lambda);
      const double value = loss.value()[0];
      if (!std::isfinite(value)) {
        throw NumericError(fmt::format("non-finite loss at epoch {}, batch {}", epoch, b + 1));
      }
      loss_sum += value;
      tape.backward(loss);
      std::vector<const Matrix*> grads;
      grads.reserve(bound.leaves.size());
      for (const Var& leaf : bound.leaves) grads.push_back(tape.grad_if_any(leaf));
      adamw_step(tensors, grads, state, opt);
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = loss_sum / static_cast<double>(batches.size());
    const LossParts monitored = evaluate_set(params, validation ? *validation : train, config.lambda);
    stats.val_loss = monitored.loss;
    stats.val_ccc = monitored.ccc;
    stats.val_rmse = monitored.rmse;
    result.history.push_back(stats);

    if (config.log_every > 0 && epoch % config.log_every == 0) {
      spdlog::info("epoch {:5d}  train {:.5f}  monitor {:.5f}  ccc {:.4f}  rmse {:.4f}", epoch, stats.train_loss,
                   stats.val_loss, stats.val_ccc, stats.val_rmse);
    }

    if (monitored.loss < result.best_val_loss) {
      result.best_val_loss = monitored.loss;
      result.best_epoch = epoch;
      copy_values(params, best);
      since_best = 0;
    } else {
      ++since_best;
    }

    if (config.target_train_rmse > 0.0) {
      const double train_rmse = validation ? evaluate_set(params, train, config.lambda).rmse : monitored.rmse;
      if (train_rmse < config.target_train_rmse) {
        result.reached_target = true;
        result.best_epoch = epoch;
        result.best_val_loss = monitored.loss;
        return result;
      }
    }
    if (since_best > config.patience) {
      result.stopped_early = true;
      break;
    }
  }
  copy_values(best, params);
  return result;
}

FitResult fit(const Dataset& train, const Dataset* validation, const ModelConfig& model,
              const TrainConfig& config) {
  if (!train.normalization() || train.normalization()->kind != NormKind::standard) {
    throw ContractError("fit expects a standardized training dataset");
  }
  const TrainingSet train_set = to_training_set(train);
  if (validation == nullptr) return fit(train_set, nullptr, model, config);
  const TrainingSet val_set = to_training_set(*validation);
  return fit(train_set, &val_set, model, config);
}

CrossValidationResult cross_validate(const Dataset& raw, const ModelConfig& model, const TrainConfig& config) {
  config.validate();
  const auto folds = kfold_split(raw, config.folds, Rng(config.seed).split(kFoldStream).seed());
  const std::optional<FeatureStats> all_stats =
      config.standardize_on_all ? std::optional(fit_standard_stats(raw)) : std::nullopt;

  CrossValidationResult cv;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    const Dataset train_raw = raw.subset(folds[f].train);
    const Dataset val_raw = raw.subset(folds[f].validation);
    const FeatureStats stats = all_stats ? *all_stats : fit_standard_stats(train_raw);
    const Dataset train = apply_stats(train_raw, stats);
    const Dataset val = apply_stats(val_raw, stats);

    TrainConfig fold_config = config;
    fold_config.seed = Rng(config.seed).split(100 + f).seed();
    FoldResult fr;
    fr.fold = f + 1;
    fr.fit = fit(train, &val, model, fold_config);
    fr.stats = stats;
    const std::vector<double> pred = predict(fr.fit.params, to_training_set(val).input);
    fr.validation = evaluate(pred, val.mos(), Scale::mos5);
    cv.folds.push_back(std::move(fr));
  }

  const double k = static_cast<double>(cv.folds.size());
  auto mean_of = [&](auto field) {
    double s = 0.0;
    for (const auto& f : cv.folds) s += field(f.validation);
    return s / k;
  };
  auto std_of = [&](auto field, double mean) {
    double s = 0.0;
    for (const auto& f : cv.folds) s += (field(f.validation) - mean) * (field(f.validation) - mean);
    return std::sqrt(s / k);
  };
  auto rp = [](const EvalReport& r) { return r.r_p; };
  auto rs = [](const EvalReport& r) { return r.r_s; };
  auto re = [](const EvalReport& r) { return r.rmse; };
  cv.mean = {mean_of(rp), mean_of(rs), mean_of(re), 0, Scale::mos5};
  cv.stddev = {std_of(rp, cv.mean.r_p), std_of(rs, cv.mean.r_s), std_of(re, cv.mean.rmse), 0, Scale::mos5};
  for (const auto& f : cv.folds) {
    cv.mean.n += f.validation.n;
    cv.stddev.n += f.validation.n;
  }
  return cv;
}

void write_history_csv(const std::vector<EpochStats>& history, std::ostream& out) {
  out << "epoch,train_loss,val_loss,val_ccc,val_rmse\n";
  for (const auto& h : history) {
    out << fmt::format("{},{},{},{},{}\n", h.epoch, h.train_loss, h.val_loss, h.val_ccc, h.val_rmse);
  }
}

}  // namespace avq
