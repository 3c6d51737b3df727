#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include <json.hpp>

#include "avq/data/dataset.hpp"
#include "avq/eval/metrics.hpp"
#include "avq/model/fusion_net.hpp"
#include "avq/train/adamw.hpp"

namespace avq {

struct TrainConfig {
  double lambda = 0.6;
  double lr = 1e-4;
  double weight_decay = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t batch_size = 32;
  std::size_t folds = 5;
  std::size_t max_epochs = 5000;
  std::size_t patience = 50;
  std::uint64_t seed = 0;
  /// Stop as soon as eval-mode training RMSE drops below this (0 disables).
  double target_train_rmse = 0.0;
  /// Standardize with statistics of the whole dataset instead of the training part.
  bool standardize_on_all = false;
  /// Log a progress line every this many epochs (0 disables).
  std::size_t log_every = 0;

  AdamWConfig optimizer() const { return {lr, weight_decay, beta1, beta2, eps}; }
  void validate() const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

/// Row-stacked model inputs with one MOS target per stimulus.
struct TrainingSet {
  ModelInput input;
  std::vector<double> target;

  std::size_t size() const { return target.size(); }
  TrainingSet gather(std::span<const std::size_t> indices) const;
};

/// Stacks audio/video features (N = 1) and MOS targets.
TrainingSet to_training_set(const Dataset& ds);

struct EpochStats {
  std::size_t epoch = 0;
  double train_loss = 0.0;  // mean of per-batch losses in train mode
  double val_loss = 0.0;    // composite loss over the monitored set in eval mode
  double val_ccc = 0.0;
  double val_rmse = 0.0;
};

struct FitResult {
  FusionNetParams params;  // weights of the best monitored epoch
  std::vector<EpochStats> history;
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
  bool stopped_early = false;
  bool reached_target = false;
};

/// Trains with AdamW on shuffled mini-batches. Early stopping monitors the
/// composite loss on `validation`, or on the training set in eval mode when
/// no validation set is given; training stops once `patience` further epochs
/// pass without improvement. NumericError on a non-finite batch loss.
FitResult fit(const TrainingSet& train, const TrainingSet* validation, const ModelConfig& model,
              const TrainConfig& config);

/// Dataset front end: expects standardized features.
FitResult fit(const Dataset& train, const Dataset* validation, const ModelConfig& model,
              const TrainConfig& config);

struct FoldResult {
  std::size_t fold = 0;
  FitResult fit;
  FeatureStats stats;
  EvalReport validation;
};

struct CrossValidationResult {
  std::vector<FoldResult> folds;
  EvalReport mean;
  EvalReport stddev;
};

/// Grouped k-fold training on raw (unnormalized) records; each fold is
/// standardized with its own training statistics unless standardize_on_all.
CrossValidationResult cross_validate(const Dataset& raw, const ModelConfig& model, const TrainConfig& config);

/// epoch,train_loss,val_loss,val_ccc,val_rmse
void write_history_csv(const std::vector<EpochStats>& history, std::ostream& out);

}  // namespace avq
