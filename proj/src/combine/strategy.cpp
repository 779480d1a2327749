#include "multissl/combine/strategy.hpp"

#include <iostream>
#include <nlohmann/json.hpp>
#include <set>

#include "multissl/core/error.hpp"

namespace multissl::combine {

using nlohmann::json;

namespace {

constexpr std::pair<Strategy, const char*> kStrategyNames[] = {
    {Strategy::kSingle, "single"},
    {Strategy::kConcat, "concat"},
    {Strategy::kMultitask, "multitask"},
    {Strategy::kIncremental, "il"},
    {Strategy::kDistillEuclidean, "distill_euclidean"},
    {Strategy::kDistillContrastive, "distill_contrastive"},
    {Strategy::kProgNet, "prognet"},
};

}  // namespace

const char* strategy_name(Strategy s) {
  for (const auto& [k, name] : kStrategyNames) {
    if (k == s) return name;
  }
  return "?";
}

Strategy parse_strategy(const std::string& s) {
  for (const auto& [k, name] : kStrategyNames) {
    if (s == name) return k;
  }
  throw ConfigError("unknown strategy '" + s +
                    "' (expected concat, multitask, il, distill_euclidean, distill_contrastive or prognet)");
}

void CombinerConfig::validate() const {
  if (tasks.empty()) throw ConfigError("combiner.tasks is empty");
  if (std::set<ssl::TaskId>(tasks.begin(), tasks.end()).size() != tasks.size()) {
    throw ConfigError("combiner.tasks contains a task twice");
  }
  const bool multi = strategy != Strategy::kSingle && strategy != Strategy::kProgNet;
  if (multi && tasks.size() < 2) {
    throw ConfigError(std::string("strategy ") + strategy_name(strategy) + " needs at least 2 tasks");
  }
  if (strategy == Strategy::kSingle && tasks.size() != 1) throw ConfigError("single-task training takes one task");
  if (!weights.empty()) {
    if (weights.size() != tasks.size()) throw ConfigError("combiner.weights must have one entry per task");
    double total = 0.0;
    for (double w : weights) {
      if (!(w >= 0.0)) throw ConfigError("combiner.weights must be >= 0");
      total += w;
    }
    if (!(total > 0.0)) throw ConfigError("combiner.weights must not all be zero");
  }
  if (!(lambda_old >= 0.0)) throw ConfigError("combiner.lambda_old must be >= 0");
  if (!(distill_temperature > 0.0) || !(distill_tau > 0.0)) {
    throw ConfigError("combiner distillation temperatures must be positive");
  }
}

std::vector<double> CombinerConfig::effective_weights() const {
  return weights.empty() ? std::vector<double>(tasks.size(), 1.0) : weights;
}

void to_json(json& j, const CombinerConfig& c) {
  std::vector<std::string> names;
  for (auto t : c.tasks) names.emplace_back(ssl::task_name(t));
  j = json{{"strategy", strategy_name(c.strategy)},
           {"tasks", names},
           {"weights", c.weights},
           {"lambda_old", c.lambda_old},
           {"distill_temperature", c.distill_temperature},
           {"distill_tau", c.distill_tau}};
}

void from_json(const json& j, CombinerConfig& c) {
  c.strategy = parse_strategy(j.at("strategy").get<std::string>());
  c.tasks.clear();
  for (const auto& t : j.at("tasks")) c.tasks.push_back(ssl::parse_task(t.get<std::string>()));
  j.at("weights").get_to(c.weights);
  j.at("lambda_old").get_to(c.lambda_old);
  j.at("distill_temperature").get_to(c.distill_temperature);
  j.at("distill_tau").get_to(c.distill_tau);
}

const nn::EncoderConfig& EncoderSet::for_kind(nn::EncoderKind k) const {
  return k == nn::EncoderKind::kSound ? sound : visual;
}

nn::AdamConfig Experiment::adam() const {
  nn::AdamConfig a;
  a.lr = train.lr;
  return a;
}

std::unique_ptr<Learner> single_task_learner(const Experiment& exp, ssl::TaskId task) {
  const std::string name = ssl::task_name(task);
  auto learner = std::make_unique<Learner>(init_trunk(exp.encoders.for_task(task), exp.seed, name), exp.adam());
  Rng head = head_stream(exp.seed, name);
  learner->add(ssl::make_task(task, exp.ctx, learner->trunk(), head), 1.0, batch_stream(exp.seed, name));
  return learner;
}

void log_validation(const Experiment& exp, const Learner& learner) {
  for (size_t k = 0; k < learner.size(); ++k) {
    const auto* task = dynamic_cast<const ssl::PretextTask*>(&learner.objective(k));
    if (task == nullptr) continue;
    for (const auto& [metric, value] : task->evaluate(learner.trunk(), scenegen::Split::kVal)) {
      exp.emit({"val", task->name(), learner.steps(), metric, value});
    }
  }
}

StrategyResult train_single(const Experiment& exp, ssl::TaskId task) {
  auto learner = single_task_learner(exp, task);
  learner->train(exp.train, "pretrain", exp.sink);
  log_validation(exp, *learner);
  StrategyResult r;
  r.state = learner->state();
  r.trunk = learner->release_trunk();
  return r;
}

StrategyResult run_strategy(const Experiment& exp, const CombinerConfig& config) {
  config.validate();
  switch (config.strategy) {
    case Strategy::kSingle: return train_single(exp, config.tasks.front());
    case Strategy::kConcat: return concat_strategy(exp, config.tasks);
    case Strategy::kMultitask: return multitask_train(exp, config.tasks, config.effective_weights());
    case Strategy::kIncremental:
      return il_train(exp, config.tasks, config.lambda_old, config.distill_temperature);
    case Strategy::kDistillEuclidean:
      return distill_train(exp, config.tasks, DistillMode::kEuclidean, config.distill_tau);
    case Strategy::kDistillContrastive:
      return distill_train(exp, config.tasks, DistillMode::kContrastive, config.distill_tau);
    case Strategy::kProgNet:
      if (config.tasks.size() == 1) {
        std::cerr << "warning: prognet with a single task is plain single-task training\n";
      }
      return prognet_train(exp, config.tasks);
  }
  throw Error("unreachable strategy");
}

}  // namespace multissl::combine
