#include "multissl/combine/strategy.hpp"
#include "multissl/core/error.hpp"

namespace multissl::combine {

namespace {

std::unique_ptr<nn::ConvTrunk> clone_column(const nn::ConvTrunk& c) {
  auto t = c.clone();
  return std::unique_ptr<nn::ConvTrunk>(static_cast<nn::ConvTrunk*>(t.release()));
}

}  // namespace

std::unique_ptr<Learner> prognet_column_learner(const Experiment& exp,
                                                const std::vector<std::unique_ptr<nn::ConvTrunk>>& previous,
                                                ssl::TaskId task, double lateral_scale) {
  const auto& cfg = exp.encoders.for_task(task);
  std::vector<std::unique_ptr<nn::ConvTrunk>> columns;
  for (const auto& c : previous) {
    if (c->config().kind != cfg.kind) {
      throw ConfigError(std::string("progressive column for ") + ssl::task_name(task) +
                        " needs a different trunk modality than the earlier columns");
    }
    columns.push_back(clone_column(*c));
  }
  const std::string name = ssl::task_name(task);
  Rng rng = Rng(exp.seed).derive("trunk/" + name);
  columns.push_back(
      std::make_unique<nn::ConvTrunk>(cfg, rng, nn::progressive_lateral_widths(cfg, static_cast<int>(previous.size()))));
  auto trunk = std::make_unique<nn::ProgressiveTrunk>(std::move(columns));
  trunk->set_lateral_scale(lateral_scale);
  auto learner = std::make_unique<Learner>(std::move(trunk), exp.adam());
  Rng head = head_stream(exp.seed, name);
  learner->add(ssl::make_task(task, exp.ctx, learner->trunk(), head), 1.0, batch_stream(exp.seed, name));
  return learner;
}

std::vector<std::unique_ptr<nn::ConvTrunk>> prognet_columns(const Learner& learner) {
  const auto* p = dynamic_cast<const nn::ProgressiveTrunk*>(&learner.trunk());
  if (p == nullptr) throw Error("learner does not hold a progressive trunk");
  std::vector<std::unique_ptr<nn::ConvTrunk>> out;
  for (size_t k = 0; k < p->size(); ++k) out.push_back(clone_column(p->column(k)));
  return out;
}

StrategyResult prognet_train(const Experiment& exp, const std::vector<ssl::TaskId>& tasks, double lateral_scale) {
  if (tasks.empty()) throw ConfigError("prognet needs at least one task");
  std::vector<std::unique_ptr<nn::ConvTrunk>> columns;
  StrategyResult r;
  for (auto t : tasks) {
    auto learner = prognet_column_learner(exp, columns, t, lateral_scale);
    learner->train(exp.train, "combine", exp.sink);
    log_validation(exp, *learner);
    columns = prognet_columns(*learner);
    r.state = learner->state();
    r.trunk = learner->release_trunk();
  }
  return r;
}

}  // namespace multissl::combine
