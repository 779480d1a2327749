#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "fixtures.hpp"
#include "multissl/combine/strategy.hpp"
#include "multissl/core/error.hpp"
#include "multissl/runner/checkpoint.hpp"
#include "multissl/runner/config.hpp"
#include "multissl/runner/metrics_log.hpp"
#include "multissl/runner/pipeline.hpp"
#include "multissl/runner/report.hpp"
#include "multissl/runner/run_dir.hpp"
#include "multissl/runner/selfcheck.hpp"

using namespace multissl;
using namespace multissl::runner;
namespace fs = std::filesystem;
using nlohmann::json;
using testkit::TempDir;

namespace {

// Seconds-scale run: tiny scenes, two-layer encoders, a few steps.
const char* kTinyConfig = R"({
  "dataset": {"sample_rate": 8000, "duration": 2.0, "height": 8, "width": 64, "semantic_bins": 8,
              "max_sources": 1, "azimuth_span": 120.0, "max_speed": 10.0,
              "train": 12, "val": 6, "test": 6},
  "input": {"segment_seconds": 1.0, "window": 256, "hop": 128},
  "encoder": {"sound": {"channels": [4, 8], "embedding_dim": 8},
              "visual": {"channels": [4, 8], "embedding_dim": 8}},
  "tasks": {"batch_size": 4, "rotation_hidden": 16, "queue_size": 8, "aux_channels": [4, 8], "aux_dim": 8},
  "train": {"steps": 3, "log_every": 1},
  "downstream": {"steps": 2, "batch_size": 4, "decoder_hidden": 8, "probe": {"steps": 20}}
})";

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

RunConfig tiny_run_config() { return config_from_json(parse_config_text(kTinyConfig, "tiny.json")); }

std::string cli(const fs::path& root, const std::string& args, int* code) {
  std::string out;
  *code = testkit::run_command("MULTISSL_ROOT='" + root.string() + "' '" MULTISSL_CLI "' " + args, &out);
  return out;
}

Checkpoint sample_checkpoint() {
  const auto exp = tiny_experiment(testkit::tiny_dataset());
  auto single = combine::train_single(exp, ssl::TaskId::kGap);
  return {{"0123456789abcdef", single.trunk->describe(), "single", {"C_gap"}, 1}, single.state};
}

}  // namespace

TEST(Config, DefaultsParseAndValidate) {
  const RunConfig c = config_from_json(default_config_json());
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(config_to_json(c), default_config_json());
  EXPECT_NO_THROW(tiny_run_config().validate());
}

TEST(Config, UnknownKeyNamesPathAndLine) {
  try {
    parse_config_text("{\n  \"train\": {\n    \"stepz\": 3\n  }\n}", "my.json");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(std::string(e.what()), "my.json:3: train.stepz: unknown key");
  }
}

TEST(Config, TypeMismatchNamesExpectedType) {
  try {
    parse_config_text("{\"seed\": 1,\n \"train\": {\"lr\": \"fast\"}}", "t.json");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(std::string(e.what()), "t.json:2: train.lr: expected a number, got a string");
  }
  EXPECT_THROW(parse_config_text("{\"seed\": -1}", "t.json"), ConfigError);
  EXPECT_THROW(parse_config_text("{\"dataset\": 3}", "t.json"), ConfigError);
}

TEST(Config, MalformedJsonReportsLine) {
  try {
    parse_config_text("{\n\"seed\": 1,\n,}", "bad.json");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(std::string(e.what()).rfind("bad.json:3: malformed JSON", 0), 0u) << e.what();
  }
}

TEST(Config, SemanticValidation) {
  auto c = tiny_run_config();
  c.input.segment_seconds = 5.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = tiny_run_config();
  c.tasks.batch_size = 100;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Config, HashIgnoresRunIdOnly) {
  auto a = tiny_run_config();
  auto b = a;
  b.run_id = "named";
  EXPECT_EQ(config_hash(a), config_hash(b));
  b.seed = 9;
  EXPECT_NE(config_hash(a), config_hash(b));
  EXPECT_EQ(config_hash(a).size(), 16u);
}

TEST(Checkpoint, RoundTrip) {
  TempDir tmp("ckpt");
  const auto ckpt = sample_checkpoint();
  save_checkpoint(tmp.path() / "c.bin", ckpt);
  EXPECT_EQ(load_checkpoint(tmp.path() / "c.bin", "0123456789abcdef"), ckpt);
  EXPECT_FALSE(fs::exists(tmp.path() / "c.bin.tmp"));
  const auto trunk = restore_trunk(ckpt);
  EXPECT_TRUE(nn::same_values(trunk->parameters(), nn::with_prefix(ckpt.state.params, "trunk.")));
  EXPECT_EQ(file_hash(tmp.path() / "c.bin").size(), 16u);
}

TEST(Checkpoint, RejectsDamage) {
  TempDir tmp("ckpt");
  const fs::path p = tmp.path() / "c.bin";
  save_checkpoint(p, sample_checkpoint());
  const std::string bytes = testkit::read_text(p);
  auto expect_error = [&](const std::string& content, const std::string& fragment) {
    write_file(p, content);
    try {
      load_checkpoint(p);
      ADD_FAILURE() << "accepted: " << fragment;
    } catch (const IoError& e) {
      EXPECT_NE(std::string(e.what()).find(fragment), std::string::npos) << e.what();
    }
  };
  expect_error(bytes.substr(0, bytes.size() - 5), "is truncated");
  expect_error(bytes + "x", "trailing bytes");
  expect_error("not a checkpoint at all", "is not a checkpoint");
  std::string v2 = bytes;
  v2[8] = 2;
  expect_error(v2, "format version 2, this build reads version 1");
}

TEST(Checkpoint, ConfigHashGuard) {
  TempDir tmp("ckpt");
  const fs::path p = tmp.path() / "c.bin";
  save_checkpoint(p, sample_checkpoint());
  EXPECT_THROW(load_checkpoint(p, "ffffffffffffffff"), IoError);
  EXPECT_NO_THROW(load_checkpoint(p, "ffffffffffffffff", true));
  EXPECT_NO_THROW(load_checkpoint(p, ""));
}

TEST(Checkpoint, NonFiniteIsRefused) {
  TempDir tmp("ckpt");
  auto ckpt = sample_checkpoint();
  ckpt.state.params[0].second[0] = std::nan("");
  EXPECT_THROW(save_checkpoint(tmp.path() / "c.bin", ckpt), Error);
}

TEST(MetricsLog, KeyOrderAndContinuedNumbering) {
  TempDir tmp("log");
  const fs::path p = tmp.path() / "metrics.jsonl";
  {
    MetricsLog log(p, "r1");
    log.write({"train", "A_spatial", 1, "loss", 0.5});
    log.write({"val", "A_spatial", 1, "accuracy", 0.25});
  }
  {
    MetricsLog log(p, "r1");
    EXPECT_EQ(log.next_ts(), 2);
    log.sink()({"eval", "probe", 0, "accuracy", 1.0});
  }
  std::istringstream lines(testkit::read_text(p));
  std::string first;
  std::getline(lines, first);
  EXPECT_EQ(first,
            R"({"ts":0,"run_id":"r1","phase":"train","task":"A_spatial","step":1,"metric":"loss","value":0.5})");
  const auto rows = read_metrics(p);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[2].ts, 2);
  EXPECT_EQ(rows[2].row.phase, "eval");
  EXPECT_EQ(rows[1].row.value, 0.25);
}

TEST(RunDir, RefusesExistingRunUnlessForced) {
  TempDir tmp("root");
  {
    auto d = RunDir::create(tmp.path(), "r", false);
    write_file(d.metrics(), "x\n");
  }
  EXPECT_THROW(RunDir::create(tmp.path(), "r", false), Error);
  auto d = RunDir::create(tmp.path(), "r", true);
  EXPECT_FALSE(fs::exists(d.metrics()));
  EXPECT_THROW(RunDir::open(tmp.path(), "missing"), Error);
}

TEST(RunDir, LedgerAppends) {
  TempDir tmp("root");
  append_ledger(tmp.path(), {{"event", "a"}});
  append_ledger(tmp.path(), {{"event", "b"}});
  const auto events = read_ledger(tmp.path());
  ASSERT_EQ(events.size(), 2u);
  EXPECT_EQ(events[1]["event"], "b");
}

TEST(Pipeline, RunIdEncodesStrategyTasksSeed) {
  auto c = tiny_run_config();
  const std::string id = derive_run_id("combine", c);
  EXPECT_EQ(id.rfind("combine-multitask-AC-s0-", 0), 0u) << id;
  EXPECT_EQ(id.substr(id.size() - 8), config_hash(c).substr(0, 8));
}

TEST(Pipeline, TrainRunWritesArtifactsAndEvaluates) {
  TempDir tmp("root");
  auto c = tiny_run_config();
  c.downstream.harnesses = {downstream::Harness::kRetrieval, downstream::Harness::kProbe};
  std::ostringstream log;
  const auto s = train_run(c, tmp.path(), {"combine", false, true}, log);
  EXPECT_TRUE(fs::exists(s.dir / "config.json"));
  EXPECT_TRUE(fs::exists(s.dir / "checkpoint.bin"));
  EXPECT_EQ(s.checkpoint_hash, file_hash(s.dir / "checkpoint.bin"));
  const auto rows = read_metrics(s.dir / "metrics.jsonl");
  int evals = 0;
  for (const auto& r : rows) evals += r.row.phase == "eval";
  EXPECT_EQ(evals, 2);
  EXPECT_THROW(train_run(c, tmp.path(), {"combine", false, false}, log), Error);

  const auto runs = collect_runs(tmp.path());
  ASSERT_EQ(runs.size(), 1u);
  EXPECT_EQ(runs[0].strategy, "multitask");
  EXPECT_TRUE(runs[0].eval.count("probe/top1"));
  std::ostringstream table;
  render_report(runs, table);
  EXPECT_NE(table.str().find("multitask"), std::string::npos);
}

TEST(Cli, ExitCodes) {
  TempDir tmp("cli");
  const fs::path cfg = tmp.path() / "tiny.json";
  write_file(cfg, kTinyConfig);
  const fs::path bad = tmp.path() / "bad.json";
  write_file(bad, "{\"train\": {\"stepz\": 1}}");
  int code = -1;
  std::string out = cli(tmp.path(), "pretrain --task C --config '" + cfg.string() + "'", &code);
  EXPECT_EQ(code, 0) << out;
  out = cli(tmp.path(), "pretrain --task C --config '" + cfg.string() + "'", &code);
  EXPECT_EQ(code, 1) << out;
  out = cli(tmp.path(), "pretrain --task C --config '" + bad.string() + "'", &code);
  EXPECT_EQ(code, 2) << out;
  EXPECT_NE(out.find("train.stepz: unknown key"), std::string::npos) << out;
  out = cli(tmp.path(), "pretrain --task Z --config '" + cfg.string() + "'", &code);
  EXPECT_EQ(code, 2) << out;
  out = cli(tmp.path(), "combine --strategy bogus --config '" + cfg.string() + "'", &code);
  EXPECT_EQ(code, 2) << out;
  out = cli(tmp.path(), "evaluate --run nope", &code);
  EXPECT_EQ(code, 1) << out;
  out = cli(tmp.path(), "report", &code);
  EXPECT_EQ(code, 0) << out;
}

TEST(Cli, RerunIsByteIdentical) {
  TempDir a("det_a"), b("det_b");
  std::string metrics[2];
  const TempDir* roots[2] = {&a, &b};
  for (int i = 0; i < 2; ++i) {
    const fs::path cfg = roots[i]->path() / "tiny.json";
    write_file(cfg, kTinyConfig);
    int code = -1;
    const std::string out = cli(roots[i]->path(),
                                "combine --strategy il --tasks C,A --run-id det --evaluate --config '" + cfg.string() + "'",
                                &code);
    ASSERT_EQ(code, 0) << out;
    metrics[i] = testkit::read_text(roots[i]->path() / "runs" / "det" / "metrics.jsonl");
  }
  EXPECT_FALSE(metrics[0].empty());
  EXPECT_EQ(metrics[0], metrics[1]);
}

TEST(Cli, EvaluateExistingRun) {
  TempDir tmp("cli");
  const fs::path cfg = tmp.path() / "tiny.json";
  write_file(cfg, kTinyConfig);
  int code = -1;
  std::string out = cli(tmp.path(), "pretrain --task B --run-id b --config '" + cfg.string() + "'", &code);
  ASSERT_EQ(code, 0) << out;
  out = cli(tmp.path(), "evaluate --run b", &code);
  EXPECT_EQ(code, 0) << out;
  EXPECT_TRUE(fs::exists(tmp.path() / "runs" / "b" / "reports.jsonl"));
}

TEST(Cli, VerifyPasses) {
  TempDir tmp("cli");
  int code = -1;
  const std::string out = cli(tmp.path(), "verify", &code);
  EXPECT_EQ(code, 0) << out;
}
