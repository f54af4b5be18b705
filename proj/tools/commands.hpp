#pragma once

#include <cstddef>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

#include "inmerge/ablation.hpp"
#include "inmerge/data.hpp"

namespace inmerge::cli {

// 0 success, 2 config error, 3 data error, 4 numeric failure, 1 otherwise.
int exit_code_for(const std::exception& e);

struct TrainOptions {
  std::filesystem::path config;
  std::optional<std::filesystem::path> out;
  std::optional<std::filesystem::path> resume;
};

// Output directory contents:
//   config.json         resolved run configuration
//   train_log.jsonl     one "epoch" record per epoch, then a "summary"
//   merge_reports.jsonl one record per merge sweep
//   run_info.json       wall-clock timestamps (not reproducible)
//   last.ckpt           full training state after the latest epoch
//   best.ckpt           best-validation model
void cmd_train(const TrainOptions& opts, std::ostream& log);

struct EvalOptions {
  std::filesystem::path checkpoint;
  std::filesystem::path data;
  SplitName split = SplitName::kTest;
  std::optional<std::filesystem::path> out;  // writes roc.csv when set
};

void cmd_eval(const EvalOptions& opts, std::ostream& out);

struct AnalyzeOptions {
  std::filesystem::path checkpoint;
  std::size_t layer = 0;
  std::optional<std::filesystem::path> out;
};

// Pair list "i,j,sim" and a 20-bin histogram "bin_lo,bin_hi,count", to
// pairs.csv/histogram.csv under `out`, or both to `out_stream`.
void cmd_analyze(const AnalyzeOptions& opts, std::ostream& out_stream);

struct AblateOptions {
  std::filesystem::path config;
  AblationAxis axis = AblationAxis::kP;
  std::vector<double> values;
  std::vector<std::uint64_t> seeds;
  std::optional<std::filesystem::path> out;
  std::size_t threads = 1;
};

AblationResult cmd_ablate(const AblateOptions& opts, std::ostream& out);

struct SynthOptions {
  SynthSpec spec;
  std::filesystem::path out;
};

void cmd_synth(const SynthOptions& opts, std::ostream& log);

std::vector<double> parse_double_list(const std::string& csv);
std::vector<std::uint64_t> parse_seed_list(const std::string& csv);

}  // namespace inmerge::cli
