#include <gtest/gtest.h>

#include <chrono>
#include <cstdlib>
#include <sstream>
#include <sys/wait.h>

#include "commands.hpp"
#include "inmerge/checkpoint.hpp"
#include "inmerge/config_io.hpp"
#include "inmerge/error.hpp"
#include "inmerge/io.hpp"
#include "scratch.hpp"

namespace inmerge {
namespace {

namespace fs = std::filesystem;
using testing::ScratchDir;

std::string slurp(const fs::path& p) {
  const auto bytes = read_file(p);
  return {bytes.begin(), bytes.end()};
}

// A small synthetic dataset and a run config next to it.
class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    cli::SynthOptions s;
    s.spec.classes = 3;
    s.spec.per_class = 30;
    s.spec.height = 12;
    s.spec.width = 12;
    s.spec.seed = 8;
    s.out = dir_ / "data";
    std::ostringstream sink;
    cli::cmd_synth(s, sink);
  }

  fs::path write_config(const std::string& name, json merge) {
    json cfg = {{"arch",
                 {{"layers",
                   {{{"kind", "conv2d"}, {"out_channels", 4}, {"padding", 1}},
                    {{"kind", "relu"}},
                    {{"kind", "maxpool2d"}},
                    {{"kind", "conv2d"}, {"out_channels", 4}, {"padding", 1}},
                    {{"kind", "relu"}},
                    {{"kind", "flatten"}},
                    {{"kind", "dense"}, {"out_features", 3}}}}}},
                {"data", "data"},
                {"train",
                 {{"epochs_pretrain", 2}, {"epochs_inmerge", 1}, {"batch_size", 16}, {"seed", 1}}},
                {"output", name}};
    if (!merge.is_null()) cfg["merge"] = merge;
    const fs::path path = dir_ / (name + ".json");
    write_text_atomic(path, cfg.dump(2));
    return path;
  }

  fs::path train(const fs::path& config, std::optional<fs::path> out = {}) {
    std::ostringstream sink;
    cli::TrainOptions o;
    o.config = config;
    o.out = out;
    cli::cmd_train(o, sink);
    return out ? *out : load_run_config(config).output_dir;
  }

  ScratchDir dir_{"cli"};
};

TEST(ExitCodeTest, Mapping) {
  EXPECT_EQ(cli::exit_code_for(ConfigError("x")), 2);
  EXPECT_EQ(cli::exit_code_for(DataError(DataError::Kind::kInvalid, "x")), 3);
  EXPECT_EQ(cli::exit_code_for(CheckpointError(CheckpointError::Kind::kBadMagic, "x")), 3);
  EXPECT_EQ(cli::exit_code_for(NumericError("x")), 4);
  EXPECT_EQ(cli::exit_code_for(std::runtime_error("x")), 1);
}

TEST(ListParseTest, Lists) {
  EXPECT_EQ(cli::parse_double_list("0.1,0.5"), (std::vector<double>{0.1, 0.5}));
  EXPECT_EQ(cli::parse_seed_list("3,1"), (std::vector<std::uint64_t>{3, 1}));
  EXPECT_THROW(cli::parse_double_list("0.1,x"), ConfigError);
  EXPECT_THROW(cli::parse_seed_list("1.5"), ConfigError);
  EXPECT_THROW(cli::parse_double_list(""), ConfigError);
}

TEST_F(CliTest, MergeFreeConfigIsTaggedBaseline) {
  const fs::path out = train(write_config("base", nullptr));
  const std::string log = slurp(out / "train_log.jsonl");
  std::istringstream lines(log);
  std::string line;
  std::size_t epochs = 0;
  bool summary = false;
  while (std::getline(lines, line)) {
    const json rec = json::parse(line);
    EXPECT_EQ(rec.at("mode"), "baseline");
    if (rec.at("record") == "epoch") {
      ++epochs;
      EXPECT_EQ(rec.at("sweeps"), 0);
    } else {
      summary = true;
    }
  }
  EXPECT_EQ(epochs, 3u);
  EXPECT_TRUE(summary);
  for (const char* f : {"config.json", "best.ckpt", "last.ckpt", "run_info.json"}) {
    EXPECT_TRUE(fs::exists(out / f)) << f;
  }
}

TEST_F(CliTest, RerunGivesIdenticalOutputs) {
  const fs::path cfg = write_config("merge", {{"l_s", 0}, {"tau", 0.0}});
  const fs::path a = train(cfg, dir_ / "a");
  const fs::path b = train(cfg, dir_ / "b");
  for (const char* f : {"train_log.jsonl", "merge_reports.jsonl", "best.ckpt", "last.ckpt"}) {
    EXPECT_EQ(read_file(a / f), read_file(b / f)) << f;
  }
  std::istringstream lines(slurp(a / "merge_reports.jsonl"));
  std::string line;
  std::size_t sweeps = 0;
  while (std::getline(lines, line)) ++sweeps;
  EXPECT_EQ(sweeps, 4u);  // one InMerge epoch over 64 training samples
}

TEST_F(CliTest, ResumeReproducesUninterruptedRun) {
  const fs::path cfg = write_config("merge", {{"l_s", 0}, {"tau", 0.0}});
  const fs::path full = train(cfg, dir_ / "full");

  // Stop after one epoch, then resume through the command.
  RunConfig rc = load_run_config(cfg);
  const Dataset d = load_dataset(rc.data_dir);
  ProtocolState s = start_protocol(arch_for_dataset(rc.arch, d), d, rc.train);
  ProtocolHooks hooks;
  hooks.stop_after_epochs = 1;
  continue_protocol(s, d, rc.train, hooks);
  save_protocol_state(dir_ / "one.ckpt", s, rc.train);

  cli::TrainOptions o;
  o.config = cfg;
  o.out = dir_ / "resumed";
  o.resume = dir_ / "one.ckpt";
  std::ostringstream sink;
  cli::cmd_train(o, sink);
  EXPECT_EQ(read_file(full / "best.ckpt"), read_file(dir_ / "resumed" / "best.ckpt"));
  EXPECT_EQ(read_file(full / "train_log.jsonl"),
            read_file(dir_ / "resumed" / "train_log.jsonl"));
}

TEST_F(CliTest, EvalOfBestCheckpointReproducesBestValMetric) {
  const fs::path out = train(write_config("merge", {{"l_s", 1}}));
  const Checkpoint best = load_checkpoint(out / "best.ckpt");
  std::ostringstream os;
  cli::EvalOptions e;
  e.checkpoint = out / "best.ckpt";
  e.data = dir_ / "data";
  e.split = SplitName::kVal;
  e.out = dir_ / "eval";
  cli::cmd_eval(e, os);
  const json m = json::parse(os.str());
  EXPECT_EQ(m.at("accuracy").get<double>(), best.state.log.best_val_metric);
  EXPECT_EQ(m.at("split"), "val");
  EXPECT_TRUE(fs::exists(dir_ / "eval" / "roc.csv"));
}

TEST_F(CliTest, EvalRejectsMismatchedClassCount) {
  const fs::path out = train(write_config("base", nullptr));
  cli::SynthOptions s;
  s.spec.classes = 5;
  s.spec.per_class = 4;
  s.spec.height = 12;
  s.spec.width = 12;
  s.out = dir_ / "five";
  std::ostringstream sink;
  cli::cmd_synth(s, sink);
  cli::EvalOptions e;
  e.checkpoint = out / "best.ckpt";
  e.data = dir_ / "five";
  try {
    cli::cmd_eval(e, sink);
    FAIL();
  } catch (const DataError& err) {
    const std::string msg = err.what();
    EXPECT_NE(msg.find('3'), std::string::npos) << msg;
    EXPECT_NE(msg.find('5'), std::string::npos) << msg;
    EXPECT_EQ(cli::exit_code_for(err), 3);
  }
}

TEST_F(CliTest, AnalyzeListsEveryPair) {
  const fs::path out = train(write_config("base", nullptr));
  // Duplicate kernel 0 into kernel 2 of the second conv layer.
  Checkpoint c = load_checkpoint(out / "best.ckpt");
  Tensor w = c.model.get_param("conv1.weight");
  const std::size_t per = w.size() / 4;
  std::copy(w.data().begin(), w.data().begin() + static_cast<long>(per),
            w.data().begin() + static_cast<long>(2 * per));
  c.model.set_param("conv1.weight", w);
  save_checkpoint(dir_ / "dup.ckpt", c.model);

  cli::AnalyzeOptions a;
  a.checkpoint = dir_ / "dup.ckpt";
  a.layer = 1;
  a.out = dir_ / "analysis";
  std::ostringstream os;
  cli::cmd_analyze(a, os);
  std::istringstream pairs(slurp(dir_ / "analysis" / "pairs.csv"));
  std::string line;
  std::getline(pairs, line);
  EXPECT_EQ(line, "i,j,sim");
  std::size_t rows = 0;
  bool dup_seen = false;
  while (std::getline(pairs, line)) {
    ++rows;
    if (line.rfind("0,2,", 0) == 0) {
      dup_seen = true;
      EXPECT_NEAR(std::stod(line.substr(4)), 1.0, 1e-12);
    }
  }
  EXPECT_EQ(rows, 6u);
  EXPECT_TRUE(dup_seen);

  a.layer = 2;
  EXPECT_THROW(cli::cmd_analyze(a, os), ConfigError);
}

TEST_F(CliTest, AblationGrid) {
  write_config("abl", {{"l_s", 0}, {"tau", 0.0}});
  json cfg = json::parse(slurp(dir_ / "abl.json"));
  cfg["train"]["epochs_pretrain"] = 1;
  write_text_atomic(dir_ / "abl.json", cfg.dump());
  std::ostringstream os;
  cli::AblateOptions o;
  o.config = dir_ / "abl.json";
  o.axis = AblationAxis::kP;
  o.values = {0.0, 0.5};
  o.seeds = {1, 2};
  o.threads = 2;
  const AblationResult r = cli::cmd_ablate(o, os);
  ASSERT_EQ(r.cells.size(), 4u);
  ASSERT_EQ(r.summary.size(), 2u);
  EXPECT_EQ(r.summary[0].n, 2u);

  // The p = 0 cell behaves exactly like a run with merging removed.
  RunConfig base = load_run_config(dir_ / "abl.json");
  base.train.merge.reset();
  base.train.seed = 1;
  const Dataset d = load_dataset(base.data_dir);
  const CellResult plain = run_cell(base, d, 0.0);
  EXPECT_TRUE(bit_equal(r.cells[0].best_model, plain.best_model));
  EXPECT_EQ(r.cells[0].test_metric, plain.test_metric);
  EXPECT_EQ(r.cells[0].merges_applied, 0u);

  std::istringstream summary(slurp(dir_ / "abl" / "summary.csv"));
  std::string line;
  std::size_t rows = 0;
  while (std::getline(summary, line)) ++rows;
  EXPECT_EQ(rows, 3u);
  EXPECT_EQ(os.str(), slurp(dir_ / "abl" / "summary.csv"));

  o.threads = 1;
  o.out = dir_ / "serial";
  std::ostringstream os2;
  cli::cmd_ablate(o, os2);
  EXPECT_EQ(read_file(dir_ / "serial" / "cells.csv"), read_file(dir_ / "abl" / "cells.csv"));
}

#ifdef INMERGE_CLI_PATH
int run(const std::string& args) {
  const int status = std::system((std::string(INMERGE_CLI_PATH) + " " + args +
                                  " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST_F(CliTest, BinaryExitCodes) {
  EXPECT_EQ(run("synth --classes 2 --per-class 5 --height 8 --width 8 --out " +
                (dir_ / "s").string()),
            0);
  write_text_atomic(dir_ / "bad.json", R"({"arch": {"preset": "tiny_cnn"}, "data": "d", "x": 1})");
  EXPECT_EQ(run("train --config " + (dir_ / "bad.json").string()), 2);
  write_text_atomic(dir_ / "nodata.json", R"({"arch": {"preset": "tiny_cnn"}, "data": "nope"})");
  EXPECT_EQ(run("train --config " + (dir_ / "nodata.json").string()), 3);
  write_text_atomic(dir_ / "junk.ckpt", "junk");
  EXPECT_EQ(run("eval --checkpoint " + (dir_ / "junk.ckpt").string() + " --data " +
                (dir_ / "s").string()),
            3);
  EXPECT_NE(run("frobnicate"), 0);
}

TEST_F(CliTest, SyntheticRunFitsTheBudget) {
  // 2 pretrain + 1 InMerge epoch of tiny_cnn on 4000 28x28 samples.
  const fs::path data = dir_ / "big";
  ASSERT_EQ(run("synth --classes 4 --per-class 1250 --train 4000 --val 500 --test 500 --out " +
                data.string()),
            0);
  json cfg = {{"arch", {{"preset", "tiny_cnn"}}},
              {"data", data.string()},
              {"train", {{"epochs_pretrain", 2}, {"epochs_inmerge", 1}}},
              {"merge", json::object()},
              {"output", (dir_ / "budget").string()}};
  write_text_atomic(dir_ / "budget.json", cfg.dump());
  const auto t0 = std::chrono::steady_clock::now();
  EXPECT_EQ(run("train --config " + (dir_ / "budget.json").string()), 0);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  EXPECT_LT(secs, 120.0);
}
#endif

}  // namespace
}  // namespace inmerge
