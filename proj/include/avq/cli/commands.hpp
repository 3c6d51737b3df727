#pragma once

#include <iosfwd>
#include <string_view>

#include "avq/cli/run_config.hpp"

namespace avq {

// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;  // also I/O failures and violated preconditions
inline constexpr int kExitNumeric = 4;
inline constexpr int kExitInternal = 1;

// Each command writes its artifacts plus effective_config.json into cfg.out
// and a human-readable summary to `log`. Errors propagate as exceptions.

/// dataset.jsonl from cfg.synth.
void cmd_generate(const RunConfig& cfg, std::ostream& log);
/// Grouped k-fold training on cfg.dataset minus held-out clips: fold<k>.ckpt,
/// fold<k>_history.csv, cv_summary.json, model.ckpt (best fold), test.jsonl.
void cmd_train(const RunConfig& cfg, std::ostream& log);
/// report.json (+ predictions.csv) for cfg.checkpoint on cfg.dataset.
void cmd_evaluate(const RunConfig& cfg, std::ostream& log);
/// predictions.csv for cfg.checkpoint on cfg.dataset.
void cmd_predict(const RunConfig& cfg, std::ostream& log);
/// importance.csv and importance_summary.json.
void cmd_explain(const RunConfig& cfg, std::ostream& log);
/// baseline.json, baseline_table.csv and one svr_<set>.json per SVR row.
void cmd_baseline(const RunConfig& cfg, std::ostream& log);

void run_command(std::string_view name, const RunConfig& cfg, std::ostream& log);

/// Maps the current exception onto an exit code after printing it to stderr.
int exit_code_for_current_exception();

/// Full command-line entry point.
int run_cli(int argc, char** argv);

}  // namespace avq
