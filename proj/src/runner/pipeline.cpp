#include "multissl/runner/pipeline.hpp"

#include <chrono>
#include <fstream>
#include <iostream>

#include "multissl/core/error.hpp"
#include "multissl/runner/run_dir.hpp"

namespace multissl::runner {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<std::string> task_names(const RunConfig& c) {
  std::vector<std::string> out;
  for (auto t : c.combiner.tasks) out.emplace_back(ssl::task_name(t));
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  return json::parse(in);
}

}  // namespace

std::string derive_run_id(const std::string& command, const RunConfig& c) {
  std::string letters;
  for (auto t : c.combiner.tasks) letters += ssl::task_letter(t);
  return command + "-" + combine::strategy_name(c.combiner.strategy) + "-" + letters + "-s" + std::to_string(c.seed) +
         "-" + config_hash(c).substr(0, 8);
}

fs::path dataset_dir(const RunConfig& c, const fs::path& root) {
  if (!c.dataset_path.empty()) return c.dataset_path;
  return root / "data" / (scenegen::config_hash(c.dataset) + "-s" + std::to_string(c.data_seed));
}

scenegen::Dataset prepare_dataset(const RunConfig& c, const fs::path& root) {
  const fs::path dir = dataset_dir(c, root);
  FileLock lock(root / "locks" / ("data-" + dir.filename().string() + ".lock"));
  return scenegen::load_or_generate(dir, c.dataset, c.data_seed);
}

void evaluate_trunk(const nn::Trunk& trunk, const scenegen::Dataset& data, const RunConfig& c,
                    const downstream::Provenance& provenance, MetricsLog& metrics, const fs::path& reports,
                    std::ostream& log) {
  downstream::EvalEnv env;
  env.data = &data;
  env.input = c.input;
  env.config = c.downstream;
  env.seed = c.seed;
  env.sink = metrics.sink();
  std::ofstream rep(reports, std::ios::app);
  if (!rep) throw IoError("cannot append to " + reports.string());
  for (auto h : c.downstream.harnesses) {
    const bool needs_sound = h == downstream::Harness::kSemantic || h == downstream::Harness::kS3r;
    if (needs_sound && trunk.config().kind != nn::EncoderKind::kSound) {
      log << "skipping " << downstream::harness_name(h) << ": it needs a sound trunk\n";
      continue;
    }
    const auto t0 = std::chrono::steady_clock::now();
    const auto result = downstream::run_harness(h, trunk, env);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    for (const auto& [metric, value] : result.metrics) {
      metrics.write({"eval", downstream::harness_name(h), provenance.step, metric, value});
      const downstream::EvalReport report{downstream::harness_name(h), metric, value, provenance, wall};
      rep << json(report).dump() << '\n';
      log << downstream::harness_name(h) << " " << metric << " = " << value << "\n";
    }
  }
}

RunSummary train_run(const RunConfig& config, const fs::path& root, const RunRequest& request, std::ostream& log) {
  config.validate();
  RunConfig c = config;
  const std::string hash = config_hash(c);
  if (c.run_id.empty()) c.run_id = derive_run_id(request.command, c);
  RunDir run = RunDir::create(root, c.run_id, request.force);
  write_text(run.config(), config_to_json(c).dump(2) + "\n");
  append_ledger(root, {{"event", "start"}, {"run_id", c.run_id}, {"config_hash", hash}, {"command", request.command}});
  log << "run " << c.run_id << " (config " << hash << ")\n";

  RunSummary summary{c.run_id, run.dir(), hash, {}};
  try {
    const scenegen::Dataset data = prepare_dataset(c, root);
    MetricsLog metrics(run.metrics(), c.run_id);
    combine::Experiment exp;
    exp.ctx.data = &data;
    exp.ctx.input = c.input;
    exp.ctx.hyper = c.tasks;
    exp.encoders = c.encoders;
    exp.train = c.train;
    exp.seed = c.seed;
    exp.sink = metrics.sink();
    combine::StrategyResult result = combine::run_strategy(exp, c.combiner);

    Checkpoint ckpt;
    ckpt.meta = {hash, result.trunk->describe(), combine::strategy_name(c.combiner.strategy), task_names(c), c.seed};
    ckpt.state = std::move(result.state);
    save_checkpoint(run.checkpoint(), ckpt);
    summary.checkpoint_hash = file_hash(run.checkpoint());
    json stores = json::array();
    if (result.responses) {
      result.responses->save(run.store_stem());
      stores.push_back(run.store_stem().filename().string());
    }
    if (result.bank) {
      result.bank->save(run.bank_stem());
      stores.push_back(run.bank_stem().filename().string());
    }
    log << "checkpoint " << run.checkpoint().string() << " (" << summary.checkpoint_hash << ")\n";

    if (request.evaluate) {
      const auto trunk = restore_trunk(load_checkpoint(run.checkpoint(), hash));
      const downstream::Provenance prov{ckpt.meta.strategy, ckpt.meta.tasks, c.seed, ckpt.state.step,
                                        summary.checkpoint_hash};
      evaluate_trunk(*trunk, data, c, prov, metrics, run.reports(), log);
    }
    append_ledger(root, {{"event", "end"},
                         {"run_id", c.run_id},
                         {"config_hash", hash},
                         {"status", "complete"},
                         {"checkpoints", {run.checkpoint().filename().string()}},
                         {"checkpoint_hash", summary.checkpoint_hash},
                         {"stores", stores},
                         {"metrics", run.metrics().filename().string()}});
  } catch (const std::exception& e) {
    append_ledger(root, {{"event", "end"}, {"run_id", c.run_id}, {"config_hash", hash}, {"status", "failed"},
                         {"error", e.what()}});
    throw;
  }
  return summary;
}

void evaluate_run(const fs::path& root, const std::string& run_id, bool force, std::ostream& log) {
  RunDir run = RunDir::open(root, run_id);
  json stored = default_config_json();
  overlay_checked(stored, read_json(run.config()), {}, run.config().string());
  const RunConfig c = config_from_json(stored);
  c.validate();
  const std::string hash = config_hash(c);
  if (!fs::exists(run.checkpoint())) throw IoError("run " + run_id + " has no checkpoint at " + run.checkpoint().string());
  const Checkpoint ckpt = load_checkpoint(run.checkpoint(), hash, force);
  const auto trunk = restore_trunk(ckpt);
  const scenegen::Dataset data = prepare_dataset(c, root);
  MetricsLog metrics(run.metrics(), run_id);
  const downstream::Provenance prov{ckpt.meta.strategy, ckpt.meta.tasks, ckpt.meta.seed, ckpt.state.step,
                                    file_hash(run.checkpoint())};
  evaluate_trunk(*trunk, data, c, prov, metrics, run.reports(), log);
  append_ledger(root, {{"event", "evaluate"}, {"run_id", run_id}, {"config_hash", hash}, {"status", "complete"},
                       {"checkpoint_hash", prov.checkpoint_hash}});
}

}  // namespace multissl::runner
