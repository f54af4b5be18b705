#include <iostream>

#include "CLI11.hpp"
#include "commands.hpp"
#include "inmerge/config_io.hpp"
#include "inmerge/error.hpp"

using namespace inmerge;
using namespace inmerge::cli;

int main(int argc, char** argv) {
  CLI::App app{"In-model kernel merging for CNN training"};
  app.require_subcommand(1);

  TrainOptions train;
  std::string train_out, train_resume;
  auto* train_cmd = app.add_subcommand("train", "Pretrain, then finetune with merging");
  train_cmd->add_option("--config", train.config, "Run config (JSON)")->required();
  train_cmd->add_option("--out", train_out, "Override the output directory");
  train_cmd->add_option("--resume", train_resume, "Continue from a last.ckpt");

  EvalOptions eval;
  std::string eval_split = "test", eval_out;
  auto* eval_cmd = app.add_subcommand("eval", "Score a checkpoint on a dataset split");
  eval_cmd->add_option("--checkpoint", eval.checkpoint)->required();
  eval_cmd->add_option("--data", eval.data, "Dataset directory")->required();
  eval_cmd->add_option("--split", eval_split, "train|val|test");
  eval_cmd->add_option("--out", eval_out, "Write roc.csv and metrics.json here");

  AnalyzeOptions analyze;
  std::string analyze_out;
  auto* analyze_cmd = app.add_subcommand("analyze", "Pairwise kernel similarities of one conv layer");
  analyze_cmd->add_option("--checkpoint", analyze.checkpoint)->required();
  analyze_cmd->add_option("--layer", analyze.layer, "Conv layer ordinal")->required();
  analyze_cmd->add_option("--out", analyze_out);

  AblateOptions ablate;
  std::string axis, values, seeds = "0", ablate_out;
  auto* ablate_cmd = app.add_subcommand("ablate", "Grid of runs over one merge hyperparameter");
  ablate_cmd->add_option("--config", ablate.config)->required();
  ablate_cmd->add_option("--axis", axis, "alpha|p|tau|l_s|sim_inverted")->required();
  ablate_cmd->add_option("--values", values, "Comma-separated values")->required();
  ablate_cmd->add_option("--seeds", seeds, "Comma-separated seeds");
  ablate_cmd->add_option("--out", ablate_out);

  SynthOptions synth;
  std::string synth_kind = "striped_textures", synth_task = "multiclass";
  std::size_t train_n = 0, val_n = 0, test_n = 0;
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic dataset directory");
  synth_cmd->add_option("--kind", synth_kind, "gauss_blobs|striped_textures");
  synth_cmd->add_option("--task", synth_task, "multiclass|multilabel");
  synth_cmd->add_option("--classes", synth.spec.classes);
  synth_cmd->add_option("--per-class", synth.spec.per_class);
  synth_cmd->add_option("--channels", synth.spec.channels);
  synth_cmd->add_option("--height", synth.spec.height);
  synth_cmd->add_option("--width", synth.spec.width);
  synth_cmd->add_option("--seed", synth.spec.seed);
  synth_cmd->add_option("--label-noise", synth.spec.label_noise);
  synth_cmd->add_option("--train", train_n, "Explicit split sizes (all three)");
  synth_cmd->add_option("--val", val_n);
  synth_cmd->add_option("--test", test_n);
  synth_cmd->add_option("--out", synth.out)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train_cmd) {
      if (!train_out.empty()) train.out = train_out;
      if (!train_resume.empty()) train.resume = train_resume;
      cmd_train(train, std::cerr);
    } else if (*eval_cmd) {
      eval.split = parse_split_name(eval_split);
      if (!eval_out.empty()) eval.out = eval_out;
      cmd_eval(eval, std::cout);
    } else if (*analyze_cmd) {
      if (!analyze_out.empty()) analyze.out = analyze_out;
      cmd_analyze(analyze, std::cout);
    } else if (*ablate_cmd) {
      ablate.axis = parse_ablation_axis(axis);
      ablate.values = parse_double_list(values);
      ablate.seeds = parse_seed_list(seeds);
      ablate.threads = worker_threads();
      if (!ablate_out.empty()) ablate.out = ablate_out;
      cmd_ablate(ablate, std::cout);
    } else if (*synth_cmd) {
      synth.spec.kind = parse_synth_kind(synth_kind);
      synth.spec.task = parse_head_kind(synth_task);
      if (train_n + val_n + test_n > 0) {
        synth.spec.split_sizes = std::array<std::size_t, 3>{train_n, val_n, test_n};
      }
      cmd_synth(synth, std::cerr);
    }
  } catch (const std::exception& e) {
    std::cerr << "inmerge: " << e.what() << std::endl;
    return exit_code_for(e);
  }
  return 0;
}
