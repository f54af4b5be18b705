#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "inmerge/config_io.hpp"
#include "inmerge/data.hpp"

namespace inmerge {

enum class AblationAxis { kAlpha, kP, kTau, kLs, kSimInverted };

AblationAxis parse_ablation_axis(std::string_view s);
std::string_view ablation_axis_name(AblationAxis a);

// Copy of `base` with the axis set to `value` and every seed set to `seed`.
// A base without a merge section gets the default merge settings. For
// sim_inverted the value is the threshold of an inverted (sim < tau) gate.
RunConfig ablation_cell_config(const RunConfig& base, AblationAxis axis,
                               double value, std::uint64_t seed);

struct CellResult {
  double value = 0.0;
  std::uint64_t seed = 0;
  std::size_t best_epoch = 0;
  double best_val_metric = 0.0;
  double test_metric = 0.0;
  std::size_t merges_applied = 0;
  Model best_model;
  TrainLog log;
};

// Trains one cell and scores its best-validation model on the test split.
CellResult run_cell(const RunConfig& cfg, const Dataset& data, double value);

struct SummaryRow {
  double value = 0.0;
  std::size_t n = 0;
  double test_mean = 0.0;
  double test_std = 0.0;  // sample standard deviation (n - 1)
  double val_mean = 0.0;
  double val_std = 0.0;
};

struct AblationResult {
  AblationAxis axis;
  std::vector<CellResult> cells;  // value-major, then seed order
  std::vector<SummaryRow> summary;
};

// Worker count: INMERGE_THREADS if set (>= 1), else hardware concurrency.
std::size_t worker_threads();

// Runs every (value, seed) cell with up to `threads` workers. Results are
// independent of the worker count.
AblationResult run_ablation(const RunConfig& base, const Dataset& data,
                            AblationAxis axis, const std::vector<double>& values,
                            const std::vector<std::uint64_t>& seeds,
                            std::size_t threads);

double mean_of(const std::vector<double>& xs);
double sample_std(const std::vector<double>& xs);

std::string cells_csv(const AblationResult& r);
std::string summary_csv(const AblationResult& r);

}  // namespace inmerge
