#include "inmerge/train.hpp"

#include <algorithm>
#include <cmath>

#include "inmerge/error.hpp"
#include "inmerge/loss.hpp"

namespace inmerge {

void TrainConfig::validate() const {
  if (!(lr0 > 0.0)) throw ConfigError("train lr0 must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw ConfigError("train momentum must lie in [0,1)");
  }
  if (!(weight_decay >= 0.0)) {
    throw ConfigError("train weight_decay must be >= 0");
  }
  if (!(gamma > 0.0)) throw ConfigError("train gamma must be > 0");
  if (batch_size == 0) throw ConfigError("train batch_size must be >= 1");
  if (milestones) {
    for (std::size_t i = 1; i < milestones->size(); ++i) {
      if ((*milestones)[i] <= (*milestones)[i - 1]) {
        throw ConfigError("train milestones must be strictly increasing");
      }
    }
  }
  if (merge) merge->validate();
}

std::vector<std::size_t> TrainConfig::effective_milestones() const {
  if (milestones) return *milestones;
  return {total_epochs() * 3 / 4};
}

double lr_at(std::size_t epoch, const TrainConfig& cfg) {
  double lr = cfg.lr0;
  for (std::size_t m : cfg.effective_milestones()) {
    if (m <= epoch) lr *= cfg.gamma;
  }
  return lr;
}

void sgd_step(Tensor& param, const Tensor& grad, Tensor& velocity, double lr,
              double momentum, double weight_decay) {
  require_shape(grad, param.shape(), "sgd_step grad");
  require_shape(velocity, param.shape(), "sgd_step velocity");
  const float lr_f = static_cast<float>(lr);
  const float mom_f = static_cast<float>(momentum);
  const float wd_f = static_cast<float>(weight_decay);
  for (std::size_t i = 0; i < param.size(); ++i) {
    const float g = grad[i] + wd_f * param[i];
    velocity[i] = mom_f * velocity[i] + g;
    param[i] -= lr_f * velocity[i];
  }
}

OptimizerState make_optimizer_state(const Model& model) {
  OptimizerState s;
  for (const auto& p : model.params()) s.velocity.emplace_back(p.value.shape());
  return s;
}

std::string_view phase_name(Phase p) {
  return p == Phase::kPretrain ? "pretrain" : "inmerge";
}

namespace {

LossResult compute_loss(const Model& model, const Tensor& logits,
                        std::span<const std::uint8_t> labels) {
  return model.head().kind == HeadKind::kMultilabel
             ? sigmoid_bce(logits, labels)
             : softmax_cross_entropy(logits, labels);
}

}  // namespace

EpochStats train_epoch(Model& model, OptimizerState& optimizer,
                       const Dataset& data, const TrainConfig& cfg,
                       Phase phase, std::size_t epoch,
                       const SweepObserver& on_sweep) {
  if (data.train.count == 0) throw DataError(DataError::Kind::kInvalid,
                                             "training split is empty");
  if (optimizer.velocity.size() != model.params().size()) {
    throw ShapeError("optimizer state does not match the model");
  }
  const double lr = lr_at(epoch, cfg);
  const auto batches =
      make_batches(data.train.count, cfg.batch_size,
                   derive_seed(cfg.seed, StreamPurpose::kShuffle, epoch));
  const bool merging = phase == Phase::kInmerge && cfg.merge.has_value();
  Rng merge_rng(merging
                    ? derive_seed(cfg.merge->seed, StreamPurpose::kMerge, epoch)
                    : 0);

  EpochStats stats;
  double loss_sum = 0.0;
  for (std::size_t b = 0; b < batches.size(); ++b) {
    const auto& idx = batches[b];
    if (merging) {
      const MergeReport report = inmerge_sweep(model, *cfg.merge, merge_rng);
      ++stats.sweeps;
      stats.merge_considered += report.total_considered();
      stats.merge_draws += report.total_draws();
      stats.merge_gate_passes += report.total_gate_passes();
      stats.merges_applied += report.total_merges();
      if (on_sweep) on_sweep(epoch, b, report);
    }

    Tensor x = gather_images(data, data.train, idx);
    if (cfg.augment_flip) {
      for (std::size_t s = 0; s < idx.size(); ++s) {
        if (flip_decision(cfg.seed, epoch, idx[s], 0.5)) {
          flip_sample(x.slice(s), data.channels, data.height, data.width);
        }
      }
    }
    const auto labels = gather_labels(data, data.train, idx);

    ForwardTrace trace;
    LossResult loss;
    std::vector<Tensor> grads;
    try {
      const Tensor logits = model.forward(x, trace);
      loss = compute_loss(model, logits, labels);
      grads = model.backward(loss.grad_logits, trace);
    } catch (const NumericError& e) {
      throw NumericError("epoch " + std::to_string(epoch) + " batch " +
                         std::to_string(b) + ": " + e.what());
    }
    auto& params = model.params();
    for (std::size_t p = 0; p < params.size(); ++p) {
      sgd_step(params[p].value, grads[p], optimizer.velocity[p], lr,
               cfg.momentum, cfg.weight_decay);
    }
    loss_sum += loss.loss * static_cast<double>(idx.size());
    ++stats.iterations;
  }
  stats.train_loss = loss_sum / static_cast<double>(data.train.count);
  if (!std::isfinite(stats.train_loss)) {
    throw NumericError("epoch " + std::to_string(epoch) +
                       ": non-finite training loss");
  }
  return stats;
}

Predictions predict(const Model& model, const Dataset& data, SplitName split) {
  const Split& s = data.split(split);
  Predictions out;
  out.n = s.count;
  out.classes = model.head().classes;
  out.scores.resize(out.n * out.classes);
  const auto batches = make_batches(s.count, kEvalBatchSize, std::nullopt);
  double loss_sum = 0.0;
  for (const auto& idx : batches) {
    const Tensor logits = model.forward(gather_images(data, s, idx));
    const auto labels = gather_labels(data, s, idx);
    loss_sum += compute_loss(model, logits, labels).loss *
                static_cast<double>(idx.size());
    const std::size_t k = out.classes;
    for (std::size_t r = 0; r < idx.size(); ++r) {
      const float* row = logits.raw() + r * k;
      double* dst = out.scores.data() + idx[r] * k;
      if (model.head().kind == HeadKind::kMultilabel) {
        for (std::size_t c = 0; c < k; ++c) {
          dst[c] = 1.0 / (1.0 + std::exp(-static_cast<double>(row[c])));
        }
      } else {
        const double m = *std::max_element(row, row + k);
        double z = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
          dst[c] = std::exp(static_cast<double>(row[c]) - m);
          z += dst[c];
        }
        for (std::size_t c = 0; c < k; ++c) dst[c] /= z;
      }
    }
  }
  out.loss = out.n ? loss_sum / static_cast<double>(out.n) : 0.0;
  return out;
}

MetricBundle score_predictions(const Predictions& pred, const Dataset& data,
                               SplitName split) {
  const Split& s = data.split(split);
  if (pred.n == 0) {
    throw DataError(DataError::Kind::kInvalid,
                    std::string(split_name(split)) + " split is empty");
  }
  const std::size_t k = pred.classes;
  MetricBundle m;
  m.n_samples = pred.n;
  m.loss = pred.loss;

  std::vector<double> scores(pred.n);
  std::vector<std::uint8_t> binary(pred.n);
  if (data.task == HeadKind::kMulticlass) {
    std::vector<std::uint8_t> predicted(pred.n);
    for (std::size_t i = 0; i < pred.n; ++i) {
      const double* row = pred.scores.data() + i * k;
      predicted[i] =
          static_cast<std::uint8_t>(std::max_element(row, row + k) - row);
    }
    m.accuracy = accuracy(predicted, s.labels);
  }
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t i = 0; i < pred.n; ++i) {
      scores[i] = pred.scores[i * k + c];
      binary[i] = data.task == HeadKind::kMultilabel
                      ? s.labels[i * k + c]
                      : static_cast<std::uint8_t>(s.labels[i] == c);
    }
    m.per_class_auroc.push_back(auroc(scores, binary));
    if (!m.per_class_auroc.back()) m.absent_classes.push_back(c);
  }
  if (m.absent_classes.size() < k) m.mean_auroc = mean_auroc(m.per_class_auroc);
  return m;
}

MetricBundle evaluate(const Model& model, const Dataset& data,
                      SplitName split) {
  return score_predictions(predict(model, data, split), data, split);
}

double primary_metric(const MetricBundle& m, HeadKind head) {
  if (head == HeadKind::kMulticlass) return m.accuracy.value_or(0.0);
  return m.mean_auroc.value_or(0.0);
}

void check_compatible(const ArchConfig& arch, const Dataset& data) {
  if (arch.head.classes != data.classes) {
    throw DataError(DataError::Kind::kInvalid,
                    "model has " + std::to_string(arch.head.classes) +
                        " classes but dataset has " +
                        std::to_string(data.classes));
  }
  if (arch.head.kind != data.task) {
    throw DataError(DataError::Kind::kInvalid,
                    "model head kind does not match the dataset task");
  }
  if (arch.channels != data.channels || arch.height != data.height ||
      arch.width != data.width) {
    throw DataError(DataError::Kind::kInvalid,
                    "model input " + std::to_string(arch.channels) + "x" +
                        std::to_string(arch.height) + "x" +
                        std::to_string(arch.width) + " does not match data " +
                        std::to_string(data.channels) + "x" +
                        std::to_string(data.height) + "x" +
                        std::to_string(data.width));
  }
}

ProtocolState start_protocol(const ArchConfig& arch, const Dataset& data,
                             const TrainConfig& cfg) {
  cfg.validate();
  check_compatible(arch, data);
  Model model = build_model(arch, cfg.seed);
  OptimizerState opt = make_optimizer_state(model);
  Model best = model;
  return ProtocolState{std::move(model), std::move(opt), std::move(best), 0,
                       {}};
}

void continue_protocol(ProtocolState& state, const Dataset& data,
                       const TrainConfig& cfg, const ProtocolHooks& hooks) {
  cfg.validate();
  check_compatible(state.model.arch(), data);
  if (data.train.count == 0) {
    throw DataError(DataError::Kind::kInvalid, "training split is empty");
  }
  if (data.val.count == 0) {
    throw DataError(DataError::Kind::kInvalid, "validation split is empty");
  }
  const HeadKind head = state.model.head().kind;
  while (state.next_epoch < cfg.total_epochs()) {
    if (hooks.stop_after_epochs && state.next_epoch >= *hooks.stop_after_epochs) {
      return;
    }
    const std::size_t epoch = state.next_epoch;
    const Phase phase =
        epoch < cfg.epochs_pretrain ? Phase::kPretrain : Phase::kInmerge;
    EpochRecord rec;
    rec.epoch = epoch;
    rec.phase = phase;
    rec.lr = lr_at(epoch, cfg);
    rec.stats = train_epoch(state.model, state.optimizer, data, cfg, phase,
                            epoch, hooks.on_sweep);
    const MetricBundle val = evaluate(state.model, data, SplitName::kVal);
    rec.val_loss = val.loss;
    rec.val_metric = primary_metric(val, head);
    if (!state.log.best_epoch || rec.val_metric > state.log.best_val_metric) {
      state.log.best_epoch = epoch;
      state.log.best_val_metric = rec.val_metric;
      state.best_model = state.model;
    }
    state.log.epochs.push_back(rec);
    state.next_epoch = epoch + 1;
    if (hooks.on_epoch_end) hooks.on_epoch_end(state);
  }
}

ProtocolResult run_protocol(const ArchConfig& arch, const Dataset& data,
                            const TrainConfig& cfg,
                            const ProtocolHooks& hooks) {
  ProtocolState state = start_protocol(arch, data, cfg);
  continue_protocol(state, data, cfg, hooks);
  return {std::move(state.best_model), std::move(state.model),
          std::move(state.log)};
}

}  // namespace inmerge
