#include "multissl/runner/cli.hpp"

#include <CLI11.hpp>
#include <fstream>
#include <iostream>

#include "multissl/core/error.hpp"
#include "multissl/runner/pipeline.hpp"
#include "multissl/runner/report.hpp"
#include "multissl/runner/run_dir.hpp"
#include "multissl/runner/selfcheck.hpp"

namespace multissl::runner {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

struct CommonOptions {
  std::string config;
  std::optional<uint64_t> seed;
  std::optional<int> steps;
  std::string run_id;
  bool force = false;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config, "JSON config overlaid on the built-in defaults");
  cmd->add_option("--seed", o.seed, "Training seed");
  cmd->add_option("--steps", o.steps, "Training steps per task");
  cmd->add_option("--run-id", o.run_id, "Run directory name (default: derived from the config)");
  cmd->add_flag("--force", o.force, "Replace an existing run directory");
}

json base_config(const CommonOptions& o) {
  return o.config.empty() ? default_config_json() : load_config_json(o.config);
}

RunConfig finish_config(json merged, const CommonOptions& o, const json& patch) {
  json p = patch;
  if (o.seed) p["seed"] = *o.seed;
  if (o.steps) {
    if (*o.steps < 0) throw ConfigError("--steps must be >= 0");
    p["train"]["steps"] = static_cast<uint64_t>(*o.steps);
  }
  if (!o.run_id.empty()) p["run_id"] = o.run_id;
  if (!p.is_null()) overlay_checked(merged, p, {}, "command line");
  RunConfig c = config_from_json(merged);
  c.validate();
  return c;
}

json task_list_json(const std::vector<ssl::TaskId>& tasks) {
  json out = json::array();
  for (auto t : tasks) out.push_back(ssl::task_name(t));
  return out;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Multi-task self-supervised audio-visual pretraining on synthetic binaural scenes"};
  app.require_subcommand(1);

  CommonOptions synth_opts;
  std::optional<uint64_t> data_seed;
  auto* synth = app.add_subcommand("synth-data", "Generate the configured synthetic dataset");
  synth->add_option("--config", synth_opts.config, "JSON config overlaid on the built-in defaults");
  synth->add_option("--data-seed", data_seed, "Dataset seed");

  CommonOptions pre_opts;
  std::string task;
  bool pre_eval = false;
  auto* pretrain = app.add_subcommand("pretrain", "Train one pretext task on its own trunk");
  add_common(pretrain, pre_opts);
  pretrain->add_option("--task", task, "Task name or letter (A, B, C, M, D)")->required();
  pretrain->add_flag("--evaluate", pre_eval, "Run the downstream harnesses afterwards");

  CommonOptions com_opts;
  std::string strategy, tasks;
  std::optional<double> lambda_old;
  bool com_eval = false;
  auto* combine_cmd = app.add_subcommand("combine", "Combine several pretext tasks with a strategy");
  add_common(combine_cmd, com_opts);
  combine_cmd->add_option("--strategy", strategy,
                          "concat, multitask, il, distill_euclidean, distill_contrastive or prognet");
  combine_cmd->add_option("--tasks", tasks, "Comma-separated task list in training order, e.g. B,C,A");
  combine_cmd->add_option("--lambda-old", lambda_old, "Weight of the incremental-learning distillation term");
  combine_cmd->add_flag("--evaluate", com_eval, "Run the downstream harnesses afterwards");

  std::string eval_run;
  bool eval_force = false;
  auto* evaluate = app.add_subcommand("evaluate", "Run the downstream harnesses on a run's checkpoint");
  evaluate->add_option("--run", eval_run, "Run id under $MULTISSL_ROOT/runs")->required();
  evaluate->add_flag("--force", eval_force, "Load the checkpoint even if its config hash differs");

  std::string report_out;
  auto* report = app.add_subcommand("report", "Tabulate logged results of every run (read-only)");
  report->add_option("--output", report_out, "Write the tables to a file instead of stdout");

  auto* verify = app.add_subcommand("verify", "Run the built-in oracle and invariant checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  const fs::path root = artifact_root();
  try {
    if (*synth) {
      json merged = base_config(synth_opts);
      if (data_seed) overlay_checked(merged, {{"data_seed", *data_seed}}, {}, "command line");
      const RunConfig c = config_from_json(merged);
      c.validate();
      const auto data = prepare_dataset(c, root);
      std::cout << "dataset " << dataset_dir(c, root).string() << ": " << data.train.size() << " train, "
                << data.val.size() << " val, " << data.test.size() << " test\n";
    } else if (*pretrain) {
      const ssl::TaskId t = ssl::parse_task(task);
      const json patch{{"combiner", {{"strategy", "single"}, {"tasks", task_list_json({t})}, {"weights", json::array()}}}};
      const RunConfig c = finish_config(base_config(pre_opts), pre_opts, patch);
      train_run(c, root, {"pretrain", pre_opts.force, pre_eval}, std::cout);
    } else if (*combine_cmd) {
      json patch = json::object();
      if (!strategy.empty()) patch["combiner"]["strategy"] = strategy;
      if (!tasks.empty()) {
        const auto list = ssl::parse_task_list(tasks);
        patch["combiner"]["tasks"] = task_list_json(list);
        patch["combiner"]["weights"] = json::array();
      }
      if (lambda_old) patch["combiner"]["lambda_old"] = *lambda_old;
      const RunConfig c = finish_config(base_config(com_opts), com_opts, patch);
      if (c.combiner.strategy == combine::Strategy::kSingle) {
        throw ConfigError("combine needs a combination strategy; use pretrain for a single task");
      }
      train_run(c, root, {"combine", com_opts.force, com_eval}, std::cout);
    } else if (*evaluate) {
      evaluate_run(root, eval_run, eval_force, std::cout);
    } else if (*report) {
      const auto rows = collect_runs(root);
      if (report_out.empty()) {
        render_report(rows, std::cout);
      } else {
        std::ofstream out(report_out);
        if (!out) throw IoError("cannot write " + report_out);
        render_report(rows, out);
      }
    } else if (*verify) {
      const auto results = run_selfcheck(std::cout);
      for (const auto& r : results) {
        if (!r.pass) return kExitRuntime;
      }
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}

}  // namespace multissl::runner
