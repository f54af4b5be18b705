#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string_view>
#include <vector>

#include "inmerge/data.hpp"
#include "inmerge/merge.hpp"
#include "inmerge/metrics.hpp"
#include "inmerge/model.hpp"

namespace inmerge {

struct TrainConfig {
  double lr0 = 0.01;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  // Epochs at which the rate is multiplied by gamma. Unset means
  // {floor(0.75 * total_epochs)}.
  std::optional<std::vector<std::size_t>> milestones;
  double gamma = 0.1;
  std::size_t batch_size = 64;
  std::size_t epochs_pretrain = 20;
  std::size_t epochs_inmerge = 5;
  std::uint64_t seed = 0;
  bool augment_flip = true;
  std::optional<MergeConfig> merge;

  void validate() const;
  std::size_t total_epochs() const { return epochs_pretrain + epochs_inmerge; }
  std::vector<std::size_t> effective_milestones() const;

  bool operator==(const TrainConfig&) const = default;
};

// lr0 * gamma^(number of milestones <= epoch)
double lr_at(std::size_t epoch, const TrainConfig& cfg);

// g' = grad + weight_decay*param; v = momentum*v + g'; param -= lr*v.
void sgd_step(Tensor& param, const Tensor& grad, Tensor& velocity, double lr,
              double momentum, double weight_decay);

// Momentum buffers aligned with Model::params().
struct OptimizerState {
  std::vector<Tensor> velocity;
};

OptimizerState make_optimizer_state(const Model& model);

enum class Phase { kPretrain, kInmerge };

std::string_view phase_name(Phase p);

struct EpochStats {
  std::size_t iterations = 0;
  double train_loss = 0.0;  // sample-weighted mean over the epoch
  std::size_t sweeps = 0;
  std::size_t merge_considered = 0;
  std::size_t merge_draws = 0;
  std::size_t merge_gate_passes = 0;
  std::size_t merges_applied = 0;

  bool operator==(const EpochStats&) const = default;
};

using SweepObserver =
    std::function<void(std::size_t epoch, std::size_t iteration,
                        const MergeReport& report)>;

// One pass over the shuffled training split. In the InMerge phase (with a
// merge config present) a sweep runs at the start of every iteration,
// before the forward pass. Shuffle, flip and merge streams derive from the
// seeds and the epoch index.
EpochStats train_epoch(Model& model, OptimizerState& optimizer,
                       const Dataset& data, const TrainConfig& cfg,
                       Phase phase, std::size_t epoch,
                       const SweepObserver& on_sweep = {});

// Fixed batch size for inference so results do not depend on the caller.
inline constexpr std::size_t kEvalBatchSize = 256;

// Class probabilities [N, K] (softmax or per-class sigmoid) and the loss.
struct Predictions {
  std::size_t n = 0;
  std::size_t classes = 0;
  std::vector<double> scores;
  double loss = 0.0;
};

Predictions predict(const Model& model, const Dataset& data, SplitName split);
MetricBundle score_predictions(const Predictions& pred, const Dataset& data,
                               SplitName split);
// Inference only; never modifies the model.
MetricBundle evaluate(const Model& model, const Dataset& data,
                      SplitName split);

// Accuracy for multiclass heads, mean AUROC for multilabel heads.
double primary_metric(const MetricBundle& m, HeadKind head);

struct EpochRecord {
  std::size_t epoch = 0;
  Phase phase = Phase::kPretrain;
  double lr = 0.0;
  EpochStats stats;
  double val_loss = 0.0;
  double val_metric = 0.0;

  bool operator==(const EpochRecord&) const = default;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  std::optional<std::size_t> best_epoch;
  double best_val_metric = 0.0;

  bool operator==(const TrainLog&) const = default;
};

// Everything needed to continue a run at an epoch boundary.
struct ProtocolState {
  Model model;
  OptimizerState optimizer;
  Model best_model;
  std::size_t next_epoch = 0;
  TrainLog log;
};

struct ProtocolHooks {
  // Return after this many epochs in total have completed.
  std::optional<std::size_t> stop_after_epochs;
  std::function<void(const ProtocolState&)> on_epoch_end;
  SweepObserver on_sweep;
};

void check_compatible(const ArchConfig& arch, const Dataset& data);

ProtocolState start_protocol(const ArchConfig& arch, const Dataset& data,
                             const TrainConfig& cfg);
// Runs epochs next_epoch .. total-1: pretrain epochs first, then InMerge
// epochs. The best model is the one with the highest validation metric
// (earliest wins ties).
void continue_protocol(ProtocolState& state, const Dataset& data,
                       const TrainConfig& cfg, const ProtocolHooks& hooks = {});

struct ProtocolResult {
  Model best_model;
  Model final_model;
  TrainLog log;
};

ProtocolResult run_protocol(const ArchConfig& arch, const Dataset& data,
                            const TrainConfig& cfg,
                            const ProtocolHooks& hooks = {});

}  // namespace inmerge
