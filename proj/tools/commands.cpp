#include "commands.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "inmerge/checkpoint.hpp"
#include "inmerge/config_io.hpp"
#include "inmerge/error.hpp"
#include "inmerge/io.hpp"
#include "inmerge/merge.hpp"

namespace inmerge::cli {
namespace fs = std::filesystem;

namespace {

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::string log_body(const TrainLog& log, std::string_view mode,
                     const std::optional<MetricBundle>& test) {
  std::string body;
  for (const auto& e : log.epochs) {
    json rec = to_json(e);
    rec["record"] = "epoch";
    rec["mode"] = mode;
    body += rec.dump() + "\n";
  }
  if (test) {
    json summary = {{"record", "summary"},
                    {"mode", mode},
                    {"epochs", log.epochs.size()},
                    {"best_epoch", log.best_epoch ? json(*log.best_epoch)
                                                  : json(nullptr)},
                    {"best_val_metric", log.best_val_metric},
                    {"test", to_json(*test)}};
    body += summary.dump() + "\n";
  }
  return body;
}

}  // namespace

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return 2;
  if (dynamic_cast<const DataError*>(&e)) return 3;
  if (dynamic_cast<const CheckpointError*>(&e)) return 3;
  if (dynamic_cast<const NumericError*>(&e)) return 4;
  return 1;
}

void cmd_train(const TrainOptions& opts, std::ostream& log) {
  RunConfig cfg = load_run_config(opts.config);
  if (opts.out) cfg.output_dir = *opts.out;
  const Dataset data = load_dataset(cfg.data_dir);
  const ArchConfig arch = arch_for_dataset(cfg.arch, data);
  const std::string mode = cfg.train.merge ? "inmerge" : "baseline";
  const auto started = std::chrono::steady_clock::now();
  const std::string started_at = utc_now();

  fs::create_directories(cfg.output_dir);
  write_text_atomic(cfg.output_dir / "config.json", to_json(cfg).dump(2) + "\n");

  ProtocolState state = [&] {
    if (!opts.resume) return start_protocol(arch, data, cfg.train);
    Checkpoint ckpt = load_checkpoint(*opts.resume);
    if (ckpt.model.arch() != arch) {
      throw ConfigError("resume checkpoint architecture differs from config");
    }
    if (ckpt.state.train && *ckpt.state.train != cfg.train) {
      throw ConfigError("resume checkpoint training config differs from config");
    }
    return protocol_state_from(std::move(ckpt));
  }();

  std::ofstream sweeps(cfg.output_dir / "merge_reports.jsonl",
                       opts.resume ? std::ios::app : std::ios::trunc);
  ProtocolHooks hooks;
  hooks.on_sweep = [&](std::size_t epoch, std::size_t iteration,
                       const MergeReport& report) {
    json rec = to_json(report);
    rec["epoch"] = epoch;
    rec["iteration"] = iteration;
    sweeps << rec.dump() << '\n';
  };
  hooks.on_epoch_end = [&](const ProtocolState& s) {
    const EpochRecord& e = s.log.epochs.back();
    log << phase_name(e.phase) << " epoch " << e.epoch << ": loss "
        << e.stats.train_loss << ", val " << e.val_metric << ", merges "
        << e.stats.merges_applied << std::endl;
    save_protocol_state(cfg.output_dir / "last.ckpt", s, cfg.train);
    write_text_atomic(cfg.output_dir / "train_log.jsonl",
                      log_body(s.log, mode, std::nullopt));
  };
  continue_protocol(state, data, cfg.train, hooks);
  sweeps.flush();

  CheckpointState best_state;
  best_state.train = cfg.train;
  best_state.log = state.log;
  save_checkpoint(cfg.output_dir / "best.ckpt", state.best_model, best_state);
  save_protocol_state(cfg.output_dir / "last.ckpt", state, cfg.train);

  const MetricBundle test =
      data.test.count ? evaluate(state.best_model, data, SplitName::kTest)
                      : MetricBundle{};
  write_text_atomic(cfg.output_dir / "train_log.jsonl",
                    log_body(state.log, mode,
                             data.test.count ? std::optional(test) : std::nullopt));
  const double wall = std::chrono::duration<double>(
                          std::chrono::steady_clock::now() - started)
                          .count();
  write_text_atomic(cfg.output_dir / "run_info.json",
                    json{{"started_at", started_at},
                         {"finished_at", utc_now()},
                         {"wall_seconds", wall}}
                            .dump(2) +
                        "\n");
  log << "best epoch " << state.log.best_epoch.value_or(0) << " val "
      << state.log.best_val_metric << "; outputs in " << cfg.output_dir.string()
      << std::endl;
}

void cmd_eval(const EvalOptions& opts, std::ostream& out) {
  const Checkpoint ckpt = load_checkpoint(opts.checkpoint);
  const Dataset data = load_dataset(opts.data);
  check_compatible(ckpt.model.arch(), data);
  const Predictions pred = predict(ckpt.model, data, opts.split);
  const MetricBundle m = score_predictions(pred, data, opts.split);
  json j = to_json(m);
  j["split"] = split_name(opts.split);
  out << j.dump(2) << '\n';

  if (opts.out) {
    const Split& s = data.split(opts.split);
    std::ostringstream csv;
    csv << "class,threshold,fpr,tpr\n";
    std::vector<double> scores(pred.n);
    std::vector<std::uint8_t> labels(pred.n);
    for (std::size_t c = 0; c < pred.classes; ++c) {
      for (std::size_t i = 0; i < pred.n; ++i) {
        scores[i] = pred.scores[i * pred.classes + c];
        labels[i] = data.task == HeadKind::kMultilabel
                        ? s.labels[i * pred.classes + c]
                        : static_cast<std::uint8_t>(s.labels[i] == c);
      }
      for (const auto& p : roc_points(scores, labels)) {
        csv << c << ',' << fmt(p.threshold) << ',' << fmt(p.fpr) << ','
            << fmt(p.tpr) << '\n';
      }
    }
    write_text_atomic(*opts.out / "roc.csv", csv.str());
    write_text_atomic(*opts.out / "metrics.json", j.dump(2) + "\n");
  }
}

void cmd_analyze(const AnalyzeOptions& opts, std::ostream& out_stream) {
  const Checkpoint ckpt = load_checkpoint(opts.checkpoint);
  SimilarityStats s;
  try {
    s = similarity_stats(ckpt.model, opts.layer, 20);
  } catch (const ShapeError& e) {
    throw ConfigError(e.what());
  }
  std::ostringstream pairs, hist;
  pairs << "i,j,sim\n";
  for (const auto& p : s.pairs) {
    pairs << p.i << ',' << p.j << ',' << fmt(p.similarity) << '\n';
  }
  hist << "bin_lo,bin_hi,count\n";
  const double width = 2.0 / static_cast<double>(s.histogram.size());
  for (std::size_t b = 0; b < s.histogram.size(); ++b) {
    hist << fmt(-1.0 + width * static_cast<double>(b)) << ','
         << fmt(-1.0 + width * static_cast<double>(b + 1)) << ','
         << s.histogram[b] << '\n';
  }
  const json summary = {{"layer", s.ordinal},      {"kernels", s.kernels},
                        {"pairs", s.pairs.size()}, {"undefined_pairs", s.undefined_pairs},
                        {"min", s.min},            {"max", s.max},
                        {"mean", s.mean},          {"mean_abs", s.mean_abs}};
  if (opts.out) {
    write_text_atomic(*opts.out / "pairs.csv", pairs.str());
    write_text_atomic(*opts.out / "histogram.csv", hist.str());
    write_text_atomic(*opts.out / "summary.json", summary.dump(2) + "\n");
    out_stream << summary.dump() << '\n';
  } else {
    out_stream << pairs.str() << '\n' << hist.str();
  }
}

AblationResult cmd_ablate(const AblateOptions& opts, std::ostream& out) {
  const RunConfig base = load_run_config(opts.config);
  const Dataset data = load_dataset(base.data_dir);
  AblationResult r = run_ablation(base, data, opts.axis, opts.values,
                                  opts.seeds, opts.threads);
  const fs::path dir = opts.out.value_or(base.output_dir);
  write_text_atomic(dir / "cells.csv", cells_csv(r));
  write_text_atomic(dir / "summary.csv", summary_csv(r));
  out << summary_csv(r);
  return r;
}

void cmd_synth(const SynthOptions& opts, std::ostream& log) {
  const Dataset d = synth_make(opts.spec);
  save_dataset(d, opts.out);
  log << "wrote " << d.train.count << "/" << d.val.count << "/" << d.test.count
      << " samples to " << opts.out.string() << std::endl;
}

std::vector<double> parse_double_list(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("not a number: '" + item + "'");
    }
  }
  if (out.empty()) throw ConfigError("empty value list");
  return out;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& csv) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoull(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("not a seed: '" + item + "'");
    }
  }
  if (out.empty()) throw ConfigError("empty seed list");
  return out;
}

}  // namespace inmerge::cli
