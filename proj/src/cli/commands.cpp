#include "avq/cli/commands.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "avq/errors.hpp"
#include "avq/eval/metrics.hpp"
#include "avq/model/checkpoint.hpp"
#include "avq/train/kfold.hpp"

namespace avq {
namespace fs = std::filesystem;
namespace {

fs::path prepare_out(const RunConfig& cfg, std::string_view command) {
  const fs::path out(cfg.out);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw DataError(fmt::format("cannot create output directory {}: {}", out.string(), ec.message()));
  nlohmann::json snapshot = {{"command", std::string(command)}, {"config", to_json(cfg)}};
  std::ofstream f(out / "effective_config.json");
  if (!f) throw DataError("cannot write " + (out / "effective_config.json").string());
  f << snapshot.dump(2) << '\n';
  return out;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write " + path.string());
  return f;
}

void write_json(const fs::path& path, const nlohmann::json& j) { open_out(path) << j.dump(2) << '\n'; }

const std::string& require_path(const std::string& value, const char* what) {
  if (value.empty()) throw ConfigError(fmt::format("missing {} path (--{} or config key '{}')", what, what, what));
  return value;
}

double to_report_scale(double mos5, Scale scale) {
  const double clamped = std::clamp(mos5, 1.0, 5.0);
  return scale == Scale::mos5 ? clamped : rescale_mos(clamped, Scale::mos5, scale);
}

std::vector<double> targets_on(const Dataset& ds, Scale scale) {
  std::vector<double> out;
  out.reserve(ds.size());
  for (const auto& r : ds) out.push_back(rescale_mos(r.mos, Scale::mos5, scale));
  return out;
}

struct Predictions {
  Dataset data;
  std::vector<double> value;  // on the report scale, clamped to its range
};

Predictions checkpoint_predictions(const RunConfig& cfg) {
  const Checkpoint ckpt = load_checkpoint(require_path(cfg.checkpoint, "checkpoint"));
  Dataset raw = load_jsonl(require_path(cfg.dataset, "dataset"));
  if (raw.empty()) throw DataError("dataset " + cfg.dataset + " has no records");
  for (const auto& r : raw) {
    if (r.mos < scale_min(ckpt.scale) || r.mos > scale_max(ckpt.scale)) {
      throw DataError(fmt::format("scale mismatch: checkpoint trained on {} but '{}' has mos {}",
                                  to_string(ckpt.scale), r.stimulus_id, r.mos));
    }
  }
  if (!ckpt.feature_stats) throw DataError("checkpoint carries no feature statistics");
  Dataset ds = apply_stats(raw, *ckpt.feature_stats);
  const auto pred = predict(ckpt.params, to_training_set(ds).input);
  Predictions out{std::move(raw), {}};
  for (double p : pred) {
    const double on_mos = ckpt.scale == Scale::mos5 ? p : rescale_mos(std::clamp(p, 0.0, 100.0), ckpt.scale, Scale::mos5);
    out.value.push_back(to_report_scale(on_mos, cfg.scale));
  }
  return out;
}

ClipSplit split_for(const RunConfig& cfg, const Dataset& ds) {
  return split_by_clip(ds, cfg.held_out_clips, stage_seed(cfg.seed, Stage::split));
}

nlohmann::json report_row(std::string_view method, const EvalReport& r) {
  nlohmann::json j = to_json(r);
  j["method"] = std::string(method);
  return j;
}

}  // namespace

void cmd_generate(const RunConfig& cfg, std::ostream& log) {
  const fs::path out = prepare_out(cfg, "generate");
  const Dataset ds = synth_generate(cfg.synth, stage_seed(cfg.seed, Stage::generate));
  save_jsonl(ds, out / "dataset.jsonl");
  log << fmt::format("generated {} records: {} clips x {} audio x {} video -> {}\n", ds.size(), cfg.synth.n_clips,
                     cfg.synth.audio_ladder_kbps.size(), cfg.synth.video_ladder_mbps.size(),
                     (out / "dataset.jsonl").string());
}

void cmd_train(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  const fs::path out = prepare_out(cfg, "train");
  const Dataset ds = load_jsonl(require_path(cfg.dataset, "dataset"));
  const ClipSplit split = split_for(cfg, ds);
  if (!split.test.empty()) save_jsonl(split.test, out / "test.jsonl");

  TrainConfig tc = cfg.train;
  tc.seed = stage_seed(cfg.seed, Stage::train);
  log << fmt::format("training {} on {} records ({} held out), lambda={} lr={} heads={} dropout={}\n",
                     to_string(cfg.model.variant), split.train.size(), split.test.size(), tc.lambda, tc.lr,
                     cfg.model.heads, cfg.model.dropout);
  const CrossValidationResult cv = cross_validate(split.train, cfg.model, tc);

  nlohmann::json folds = nlohmann::json::array();
  std::size_t best = 0;
  for (std::size_t k = 0; k < cv.folds.size(); ++k) {
    const FoldResult& f = cv.folds[k];
    save_checkpoint({f.fit.params, tc.seed, f.stats, Scale::mos5}, out / fmt::format("fold{}.ckpt", k));
    auto hist = open_out(out / fmt::format("fold{}_history.csv", k));
    write_history_csv(f.fit.history, hist);
    nlohmann::json row = to_json(f.validation);
    row["fold"] = k;
    row["best_epoch"] = f.fit.best_epoch;
    row["epochs"] = f.fit.history.size();
    row["best_val_loss"] = f.fit.best_val_loss;
    folds.push_back(row);
    if (f.fit.best_val_loss < cv.folds[best].fit.best_val_loss) best = k;
    log << fmt::format("fold {}: r_p {:.4f} r_s {:.4f} rmse {:.4f} (best epoch {} of {})\n", k, f.validation.r_p,
                       f.validation.r_s, f.validation.rmse, f.fit.best_epoch, f.fit.history.size());
  }
  const FoldResult& chosen = cv.folds[best];
  save_checkpoint({chosen.fit.params, tc.seed, chosen.stats, Scale::mos5}, out / "model.ckpt");
  write_json(out / "cv_summary.json",
             {{"folds", folds}, {"mean", to_json(cv.mean)}, {"stddev", to_json(cv.stddev)}, {"model_fold", best}});
  log << fmt::format("mean r_p {:.4f}±{:.4f} r_s {:.4f}±{:.4f} rmse {:.4f}±{:.4f}; model.ckpt = fold {}\n",
                     cv.mean.r_p, cv.stddev.r_p, cv.mean.r_s, cv.stddev.r_s, cv.mean.rmse, cv.stddev.rmse, best);
}

void cmd_evaluate(const RunConfig& cfg, std::ostream& log) {
  const fs::path out = prepare_out(cfg, "evaluate");
  const Predictions p = checkpoint_predictions(cfg);
  const EvalReport report = evaluate(p.value, targets_on(p.data, cfg.scale), cfg.scale);
  write_json(out / "report.json", to_json(report));
  if (cfg.write_predictions) {
    auto f = open_out(out / "predictions.csv");
    f << "stimulus_id,prediction,mos\n";
    const auto target = targets_on(p.data, cfg.scale);
    for (std::size_t i = 0; i < p.data.size(); ++i) {
      f << fmt::format("{},{},{}\n", p.data[i].stimulus_id, p.value[i], target[i]);
    }
  }
  log << fmt::format("n={} r_p {:.4f} r_s {:.4f} rmse {:.4f} ({})\n", report.n, report.r_p, report.r_s, report.rmse,
                     to_string(report.scale));
}

void cmd_predict(const RunConfig& cfg, std::ostream& log) {
  const fs::path out = prepare_out(cfg, "predict");
  const Predictions p = checkpoint_predictions(cfg);
  auto f = open_out(out / "predictions.csv");
  f << "stimulus_id,prediction\n";
  for (std::size_t i = 0; i < p.data.size(); ++i) f << fmt::format("{},{}\n", p.data[i].stimulus_id, p.value[i]);
  log << fmt::format("wrote {} predictions ({})\n", p.data.size(), to_string(cfg.scale));
}

void cmd_explain(const RunConfig& cfg, std::ostream& log) {
  cfg.explain.validate();
  const fs::path out = prepare_out(cfg, "explain");
  const Checkpoint ckpt = load_checkpoint(require_path(cfg.checkpoint, "checkpoint"));
  if (!ckpt.feature_stats) throw DataError("checkpoint carries no feature statistics");
  const Dataset ds = apply_stats(load_jsonl(require_path(cfg.dataset, "dataset")), *ckpt.feature_stats);
  const auto raw = raw_importance(ckpt.params, ds);
  const auto reports = final_importance(raw, cfg.explain);
  auto f = open_out(out / "importance.csv");
  write_importance_csv(reports, f);

  const auto mean = mean_final_importance(reports);
  nlohmann::json summary = {{"n", reports.size()},
                            {"mean_i_final", {{"audio", mean[0]}, {"video", mean[1]}}},
                            {"alpha", cfg.explain.alpha},
                            {"beta", cfg.explain.beta}};
  // Agreement of the two raw measures is reported, never enforced.
  for (std::size_t m = 0; m < 2; ++m) {
    std::vector<double> abl, chg;
    for (const auto& r : raw) {
      abl.push_back(r.ablation[m]);
      chg.push_back(r.change_norm[m]);
    }
    const auto name = std::string(to_string(static_cast<Modality>(m)));
    try {
      summary["raw_measure_spearman"][name] = spearman(abl, chg);
    } catch (const NumericError&) {
      summary["raw_measure_spearman"][name] = nullptr;
    }
  }
  write_json(out / "importance_summary.json", summary);
  log << fmt::format("{} stimuli: mean i_final audio {:.4f} video {:.4f}\n", reports.size(), mean[0], mean[1]);
}

void cmd_baseline(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  const fs::path out = prepare_out(cfg, "baseline");
  const Dataset ds = load_jsonl(require_path(cfg.dataset, "dataset"));
  ClipSplit split;
  if (!cfg.baseline.test_dataset.empty()) {
    split = {ds, load_jsonl(cfg.baseline.test_dataset)};
  } else {
    split = split_for(cfg, ds);
  }
  if (split.test.empty()) throw ConfigError("baseline needs a test set: set held_out_clips > 0 or baseline.test_dataset");
  if (split.train.empty()) throw DataError("baseline: empty training part");
  const auto target = targets_on(split.test, cfg.scale);

  nlohmann::json rows = nlohmann::json::array();
  auto product_row = [&](std::string_view method, const ProductWeights& w) {
    std::vector<double> pred;
    for (const auto& r : split.test) pred.push_back(to_report_scale(predict_product(r, w), cfg.scale));
    nlohmann::json row = report_row(method, evaluate(pred, target, cfg.scale));
    row["w_a"] = w.w_a;
    row["w_v"] = w.w_v;
    rows.push_back(row);
  };
  product_row("Q-guess", cfg.baseline.fixed_weights);
  const ProductFit opt = optimize_product_weights(split.train);
  product_row("Q-optimized", opt.weights);
  rows.back()["train_mse"] = opt.mse;

  if (!cfg.baseline.svr.empty()) {
    const auto folds = kfold_split(split.train, cfg.baseline.svr_folds, stage_seed(cfg.seed, Stage::baseline));
    const Dataset fit_part = split.train.subset(folds[0].train);
    const Dataset val_part = split.train.subset(folds[0].validation);
    for (SvrFeatureSet set : cfg.baseline.svr) {
      const SvrGridResult grid = svr_grid_search(fit_part, val_part, set, cfg.baseline.svr_C,
                                                 cfg.baseline.svr_gamma, cfg.baseline.svr_epsilon);
      const SvrFit fit = svr_fit(split.train, set, grid.best);
      save_svr_model(fit.model, out / fmt::format("svr_{}.json", to_string(set)));
      std::vector<double> pred;
      for (double p : svr_predict(fit.model, split.test)) pred.push_back(to_report_scale(p, cfg.scale));
      nlohmann::json row = report_row(fmt::format("SVR-{}", to_string(set)), evaluate(pred, target, cfg.scale));
      row["C"] = grid.best.C;
      row["gamma"] = grid.best.gamma;
      row["epsilon"] = grid.best.epsilon;
      row["support_vectors"] = fit.model.coef.size();
      rows.push_back(row);
    }
  }

  write_json(out / "baseline.json", {{"rows", rows}, {"n_train", split.train.size()}, {"n_test", split.test.size()}});
  auto table = open_out(out / "baseline_table.csv");
  table << "method,r_p,r_s,rmse\n";
  log << fmt::format("{:<34} {:>7} {:>7} {:>7}\n", "method", "R_p", "R_s", "RMSE");
  for (const auto& row : rows) {
    std::string label = row.at("method").get<std::string>();
    if (label == "Q-guess") {
      label = fmt::format("Q-guess (w_a={}, w_v={})", row.at("w_a").get<double>(), row.at("w_v").get<double>());
    } else if (label == "Q-optimized") {
      label = fmt::format("Q-optimized (w_a={:.2f}, w_v={:.2f})", row.at("w_a").get<double>(),
                          row.at("w_v").get<double>());
    }
    table << fmt::format("{},{},{},{}\n", row.at("method").get<std::string>(), row.at("r_p").get<double>(),
                         row.at("r_s").get<double>(), row.at("rmse").get<double>());
    log << fmt::format("{:<34} {:>7.4f} {:>7.4f} {:>7.4f}\n", label, row.at("r_p").get<double>(),
                       row.at("r_s").get<double>(), row.at("rmse").get<double>());
  }
}

void run_command(std::string_view name, const RunConfig& cfg, std::ostream& log) {
  if (name == "generate") cmd_generate(cfg, log);
  else if (name == "train") cmd_train(cfg, log);
  else if (name == "evaluate") cmd_evaluate(cfg, log);
  else if (name == "predict") cmd_predict(cfg, log);
  else if (name == "explain") cmd_explain(cfg, log);
  else if (name == "baseline") cmd_baseline(cfg, log);
  else throw ConfigError("unknown command '" + std::string(name) + "'");
}

int exit_code_for_current_exception() {
  try {
    throw;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const ContractError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kExitData;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
}

int run_cli(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_st("avqfuse"));

  CLI::App app{"Audio-visual quality fusion: data synthesis, training, evaluation and attribution"};
  app.require_subcommand(1);
  std::string config_path, out, dataset, checkpoint, scale, log_level = "info";
  std::optional<std::uint64_t> seed;

  const std::pair<const char*, const char*> commands[] = {
      {"generate", "Write a synthetic feature corpus"},
      {"train", "Grouped k-fold training with per-fold checkpoints"},
      {"evaluate", "Score a checkpoint against a labeled dataset"},
      {"predict", "Predict MOS for every record of a dataset"},
      {"explain", "Per-stimulus modality importance"},
      {"baseline", "Weighted-product and SVR fusion baselines"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "JSON run configuration");
    sub->add_option("--seed", seed, "Top-level seed (overrides config)");
    sub->add_option("--out", out, "Output directory (overrides config)");
    sub->add_option("--dataset", dataset, "Feature JSONL file (overrides config)");
    sub->add_option("--checkpoint", checkpoint, "Model checkpoint (overrides config)");
    sub->add_option("--scale", scale, "Report scale")->check(CLI::IsMember({"mos5", "pct100"}));
    sub->add_option("--log-level", log_level, "trace, debug, info, warn, error or off");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }
  spdlog::set_level(spdlog::level::from_str(log_level));

  try {
    RunConfig cfg = config_path.empty() ? RunConfig{} : load_run_config(config_path);
    if (seed) cfg.seed = *seed;
    if (!out.empty()) cfg.out = out;
    if (!dataset.empty()) cfg.dataset = dataset;
    if (!checkpoint.empty()) cfg.checkpoint = checkpoint;
    if (!scale.empty()) cfg.scale = parse_scale(scale);
    run_command(app.get_subcommands().front()->get_name(), cfg, std::cout);
    return kExitOk;
  } catch (...) {
    return exit_code_for_current_exception();
  }
}

}  // namespace avq
