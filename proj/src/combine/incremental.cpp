#include <algorithm>

#include "multissl/combine/strategy.hpp"
#include "multissl/core/error.hpp"
#include "multissl/ssl/losses.hpp"

namespace multissl::combine {

using nn::Tensor;
using nn::Var;

namespace {

constexpr int kSealChunk = 32;

const ssl::PretextTask& pretext(const Learner& learner, size_t k) {
  const auto* t = dynamic_cast<const ssl::PretextTask*>(&learner.objective(k));
  if (t == nullptr) throw Error("incremental learning needs pretext-task objectives");
  return *t;
}

const char* kind_name(ssl::ResponseKind k) { return k == ssl::ResponseKind::kLogits ? "logits" : "vector"; }

std::vector<std::string> ids_of(const ssl::PretextTask& task, std::span<const int> samples) {
  std::vector<std::string> ids;
  const auto& train = task.context().data->train;
  for (int i : samples) ids.push_back(train.at(static_cast<size_t>(i)).id);
  return ids;
}

}  // namespace

void il_seal_task(const Learner& learner, size_t k, ResponseStore& store) {
  const auto& task = pretext(learner, k);
  const auto& train = task.context().data->train;
  const int n = static_cast<int>(train.size());
  std::vector<std::string> ids;
  Tensor rows;
  nn::NoGradGuard guard;
  for (int b = 0; b < n; b += kSealChunk) {
    std::vector<int> chunk;
    for (int i = b; i < std::min(n, b + kSealChunk); ++i) chunk.push_back(i);
    Tensor r = task.response(learner.trunk(), chunk).value();
    if (rows.empty()) rows = Tensor({n, r.dim(1)});
    std::copy(r.data.begin(), r.data.end(), rows.data.begin() + static_cast<std::ptrdiff_t>(b) * r.dim(1));
    for (int i : chunk) ids.push_back(train[static_cast<size_t>(i)].id);
  }
  store.seal(task.id(), kind_name(task.response_kind()), std::move(ids), std::move(rows),
             model_hash(learner.parameters()));
}

double il_distill_value(const Learner& learner, size_t k, const ResponseStore& store, std::span<const int> samples,
                        double temperature) {
  const auto& task = pretext(learner, k);
  nn::NoGradGuard guard;
  const auto ids = ids_of(task, samples);
  return ssl::distill_loss(task.response_kind(), task.response(learner.trunk(), samples),
                           store.lookup(task.id(), ids), temperature)
      .item();
}

Learner::ExtraLoss il_distill_term(const Learner& learner, std::vector<size_t> previous, size_t current,
                                   const ResponseStore& store, double lambda_old, double temperature) {
  for (size_t p : previous) {
    if (p >= current) throw Error("incremental learning may only distill tasks trained before the current one");
    if (!store.sealed(pretext(learner, p).id())) {
      throw Error(std::string("task ") + pretext(learner, p).name() + " has not been sealed");
    }
  }
  return [&learner, previous = std::move(previous), current, &store, lambda_old,
          temperature](const std::vector<ssl::TaskOutput>& outputs) {
    const auto& samples = outputs.at(current).samples;
    Var total;
    for (size_t p : previous) {
      const auto& task = pretext(learner, p);
      Var term = ssl::distill_loss(task.response_kind(), task.response(learner.trunk(), samples),
                                   store.lookup(task.id(), ids_of(task, samples)), temperature);
      total = total.defined() ? nn::add(total, term) : term;
    }
    return nn::scale(total, lambda_old);
  };
}

IncrementalSession::IncrementalSession(const Experiment& exp, ssl::TaskId first)
    : exp_(exp), learner_(single_task_learner(exp, first)), tasks_{first} {}

void IncrementalSession::add_task(ssl::TaskId task) {
  if (!store_.sealed(tasks_.back())) throw Error("train and seal the current task before adding another");
  for (size_t k = 0; k < learner_->size(); ++k) learner_->set_active(k, false);
  const std::string name = ssl::task_name(task);
  Rng head = head_stream(exp_.seed, name);
  learner_->add(ssl::make_task(task, exp_.ctx, learner_->trunk(), head), 1.0, batch_stream(exp_.seed, name));
  // Each task phase starts from fresh optimizer moments.
  learner_->optimizer().restore(0, {});
  tasks_.push_back(task);
}

void IncrementalSession::train_current(double lambda_old, double temperature) {
  const size_t current = tasks_.size() - 1;
  std::vector<size_t> previous;
  for (size_t k = 0; k < current; ++k) previous.push_back(k);
  Learner::ExtraLoss extra;
  // lambda_old = 0 is plain fine-tuning: earlier heads get no gradient at all.
  if (!previous.empty() && lambda_old != 0.0) {
    extra = il_distill_term(*learner_, previous, current, store_, lambda_old, temperature);
  }
  learner_->train(exp_.train, "combine", exp_.sink, extra);
  log_validation(exp_, *learner_);
  // Forgetting monitor: distillation loss of every earlier task over the
  // whole training split.
  const int n = static_cast<int>(exp_.ctx.data->train.size());
  for (size_t p : previous) {
    double acc = 0.0;
    for (int b = 0; b < n; b += kSealChunk) {
      std::vector<int> chunk;
      for (int i = b; i < std::min(n, b + kSealChunk); ++i) chunk.push_back(i);
      acc += il_distill_value(*learner_, p, store_, chunk, temperature) * static_cast<double>(chunk.size());
    }
    exp_.emit({"combine", ssl::task_name(tasks_[p]), learner_->steps(), "distill_loss", acc / n});
  }
  il_seal_task(*learner_, current, store_);
}

StrategyResult il_train(const Experiment& exp, const std::vector<ssl::TaskId>& tasks, double lambda_old,
                        double temperature) {
  if (tasks.size() < 2) throw ConfigError("incremental learning needs at least 2 tasks");
  IncrementalSession session(exp, tasks.front());
  session.train_current(lambda_old, temperature);
  for (size_t k = 1; k < tasks.size(); ++k) {
    session.add_task(tasks[k]);
    session.train_current(lambda_old, temperature);
  }
  StrategyResult r;
  r.state = session.learner().state();
  r.responses = session.store();
  r.trunk = session.learner().release_trunk();
  return r;
}

}  // namespace multissl::combine
