#include <algorithm>

#include "multissl/combine/strategy.hpp"
#include "multissl/core/error.hpp"
#include "multissl/ssl/losses.hpp"

namespace multissl::combine {

using nn::Tensor;
using nn::Var;

namespace {

constexpr int kBankChunk = 32;

Tensor canonical_batch(const nn::Trunk& trunk, const Experiment& exp, std::span<const int> samples) {
  std::vector<Tensor> items;
  for (int i : samples) {
    items.push_back(ssl::trunk_input(trunk, exp.ctx.data->train.at(static_cast<size_t>(i)), 0, exp.ctx.input));
  }
  return ssl::stack(items);
}

std::vector<std::string> train_ids(const Experiment& exp, std::span<const int> samples) {
  std::vector<std::string> ids;
  for (int i : samples) ids.push_back(exp.ctx.data->train.at(static_cast<size_t>(i)).id);
  return ids;
}

void check_same_modality(const std::vector<ssl::TaskId>& tasks) {
  for (auto t : tasks) {
    if (ssl::trunk_kind(t) != ssl::trunk_kind(tasks.front())) {
      throw ConfigError(std::string("feature distillation needs one trunk modality, but ") +
                        ssl::task_name(tasks.front()) + " and " + ssl::task_name(t) + " differ");
    }
  }
}

}  // namespace

FeatureBank extract_bank(const Experiment& exp, const std::vector<ssl::TaskId>& tasks,
                         const std::vector<const nn::Trunk*>& trunks) {
  if (tasks.size() != trunks.size()) throw Error("extract_bank needs one trunk per task");
  const int n = static_cast<int>(exp.ctx.data->train.size());
  FeatureBank bank;
  nn::NoGradGuard guard;
  for (size_t k = 0; k < tasks.size(); ++k) {
    const nn::Trunk& trunk = *trunks[k];
    Tensor rows({n, trunk.embedding_dim()});
    std::vector<std::string> ids;
    for (int b = 0; b < n; b += kBankChunk) {
      std::vector<int> chunk;
      for (int i = b; i < std::min(n, b + kBankChunk); ++i) chunk.push_back(i);
      Tensor z = nn::l2_normalize(trunk.forward(Var::constant(canonical_batch(trunk, exp, chunk))).pooled).value();
      std::copy(z.data.begin(), z.data.end(), rows.data.begin() + static_cast<std::ptrdiff_t>(b) * z.dim(1));
      auto chunk_ids = train_ids(exp, chunk);
      ids.insert(ids.end(), chunk_ids.begin(), chunk_ids.end());
    }
    bank.seal(tasks[k], "vector", std::move(ids), std::move(rows), model_hash(trunk.parameters()));
  }
  return bank;
}

DistillObjective::DistillObjective(const Experiment& exp, const FeatureBank& bank, std::vector<ssl::TaskId> tasks,
                                   DistillMode mode, double tau, int trunk_dim, Rng& rng)
    : exp_(exp), bank_(bank), tasks_(std::move(tasks)), mode_(mode), tau_(tau) {
  if (!(tau > 0.0)) throw ConfigError("distillation tau must be positive");
  for (auto t : tasks_) proj_.emplace_back(trunk_dim, bank_.entry(t).dim, rng);
}

nn::NamedParams DistillObjective::parameters() const {
  nn::NamedParams out;
  for (size_t k = 0; k < proj_.size(); ++k) {
    nn::append_params(out, std::string("proj_") + ssl::task_letter(tasks_[k]) + ".", proj_[k].parameters());
  }
  return out;
}

Var DistillObjective::loss(const nn::Trunk& trunk, std::span<const int> samples) const {
  const Var pooled = trunk.forward(Var::constant(canonical_batch(trunk, exp_, samples))).pooled;
  const auto ids = train_ids(exp_, samples);
  Var total;
  for (size_t k = 0; k < proj_.size(); ++k) {
    const Var z = nn::l2_normalize(proj_[k](pooled));
    const Tensor target = bank_.lookup(tasks_[k], ids);
    Var term;
    if (mode_ == DistillMode::kEuclidean) {
      // Mean squared distance per row.
      term = nn::scale(nn::mse(z, target), static_cast<double>(target.dim(1)));
    } else {
      term = ssl::info_nce({z, Var::constant(target), Var()}, tau_);
    }
    total = total.defined() ? nn::add(total, term) : term;
  }
  return total;
}

ssl::TaskOutput DistillObjective::train_loss(const nn::Trunk& trunk, Rng& rng) {
  ssl::TaskOutput out;
  out.samples = ssl::draw_distinct(static_cast<int>(exp_.ctx.data->train.size()), exp_.ctx.hyper.batch_size, rng);
  out.loss = loss(trunk, out.samples);
  return out;
}

void DistillObjective::set_identity() {
  for (auto& p : proj_) {
    Tensor& w = p.weight.mutable_value();
    if (w.dim(0) != w.dim(1)) throw Error("identity projection needs matching dimensions");
    std::fill(w.data.begin(), w.data.end(), 0.0);
    for (int i = 0; i < w.dim(0); ++i) w.data[static_cast<size_t>(i) * w.dim(1) + i] = 1.0;
    std::fill(p.bias.mutable_value().data.begin(), p.bias.mutable_value().data.end(), 0.0);
  }
}

StrategyResult distill_train(const Experiment& exp, const std::vector<ssl::TaskId>& tasks, DistillMode mode,
                             double tau) {
  if (tasks.size() < 2) throw ConfigError("feature distillation needs at least 2 tasks");
  check_same_modality(tasks);
  std::vector<std::unique_ptr<nn::Trunk>> teachers;
  std::vector<const nn::Trunk*> views;
  for (auto t : tasks) {
    teachers.push_back(train_single(exp, t).trunk);
    views.push_back(teachers.back().get());
  }
  FeatureBank bank = extract_bank(exp, tasks, views);
  std::vector<int> all(exp.ctx.data->train.size());
  for (size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
  bank.check_covers(train_ids(exp, all));

  StrategyResult r;
  {
    const auto& cfg = exp.encoders.for_task(tasks.front());
    Learner learner(init_trunk(cfg, exp.seed, "distill"), exp.adam());
    Rng head = head_stream(exp.seed, "distill");
    learner.add(std::make_unique<DistillObjective>(exp, bank, tasks, mode, tau, cfg.embedding_dim, head), 1.0,
                batch_stream(exp.seed, "distill"));
    learner.train(exp.train, "combine", exp.sink);
    r.state = learner.state();
    r.trunk = learner.release_trunk();
  }
  r.bank = std::move(bank);
  return r;
}

}  // namespace multissl::combine
