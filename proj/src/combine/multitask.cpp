#include "multissl/core/error.hpp"
#include "multissl/combine/strategy.hpp"

namespace multissl::combine {

std::unique_ptr<Learner> multitask_learner(const Experiment& exp, const std::vector<ssl::TaskId>& tasks,
                                           const std::vector<double>& weights) {
  if (tasks.size() < 2) throw ConfigError("multitask training needs at least 2 tasks");
  if (weights.size() != tasks.size()) throw ConfigError("multitask training needs one weight per task");
  const auto kind = ssl::trunk_kind(tasks.front());
  for (auto t : tasks) {
    if (ssl::trunk_kind(t) != kind) {
      throw ConfigError(std::string("tasks ") + ssl::task_name(tasks.front()) + " and " + ssl::task_name(t) +
                        " need different trunk modalities and cannot share a trunk");
    }
  }
  auto learner = std::make_unique<Learner>(
      init_trunk(exp.encoders.for_kind(kind), exp.seed, ssl::task_name(tasks.front())), exp.adam());
  for (size_t k = 0; k < tasks.size(); ++k) {
    const std::string name = ssl::task_name(tasks[k]);
    Rng head = head_stream(exp.seed, name);
    learner->add(ssl::make_task(tasks[k], exp.ctx, learner->trunk(), head), weights[k],
                 batch_stream(exp.seed, name));
  }
  return learner;
}

StrategyResult multitask_train(const Experiment& exp, const std::vector<ssl::TaskId>& tasks,
                               const std::vector<double>& weights) {
  auto learner = multitask_learner(exp, tasks, weights);
  learner->train(exp.train, "combine", exp.sink);
  log_validation(exp, *learner);
  StrategyResult r;
  r.state = learner->state();
  r.trunk = learner->release_trunk();
  return r;
}

}  // namespace multissl::combine
