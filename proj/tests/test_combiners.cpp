#include <gtest/gtest.h>

#include <cmath>

#include "fixtures.hpp"
#include "multissl/combine/strategy.hpp"
#include "multissl/core/error.hpp"
#include "multissl/nn/ops.hpp"
#include "multissl/runner/selfcheck.hpp"

using namespace multissl;
using namespace multissl::combine;
using ssl::TaskId;

namespace {

Experiment tiny(uint64_t seed = 1) { return runner::tiny_experiment(testkit::tiny_dataset(), seed); }

void expect_close(const nn::NamedParams& a, const nn::NamedParams& b, double tol) {
  ASSERT_EQ(a.size(), b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    ASSERT_EQ(a[i].first, b[i].first);
    const auto& x = a[i].second.value();
    const auto& y = b[i].second.value();
    ASSERT_EQ(x.shape, y.shape) << a[i].first;
    for (int64_t e = 0; e < x.size(); ++e) ASSERT_NEAR(x[e], y[e], tol) << a[i].first << "[" << e << "]";
  }
}

nn::NamedParams with_prefix(const nn::NamedParams& p, const std::string& prefix) {
  nn::NamedParams out;
  for (const auto& [n, v] : p) {
    if (n.rfind(prefix, 0) == 0) out.emplace_back(n.substr(prefix.size()), v);
  }
  return out;
}

std::vector<double> losses_of(std::vector<MetricRow> rows, const std::string& task) {
  std::vector<double> out;
  for (const auto& r : rows) {
    if (r.task == task && r.metric == "loss" && r.phase != "val") out.push_back(r.value);
  }
  return out;
}

}  // namespace

TEST(Multitask, TotalIsWeightedSum) {
  const auto exp = tiny();
  for (const std::vector<double>& w : {std::vector<double>{1, 1}, {0.7, 0.3}, {2.5, 0.0}}) {
    auto learner = multitask_learner(exp, {TaskId::kSpatial, TaskId::kGap}, w);
    for (int step = 0; step < 2; ++step) {
      Learner::StepResult r;
      learner->total_loss(r);
      EXPECT_NEAR(r.total, w[0] * r.outputs[0].loss.item() + w[1] * r.outputs[1].loss.item(), 1e-12);
      learner->step();
    }
  }
}

TEST(Multitask, UnitZeroWeightsReproduceSingleTask) {
  auto exp = tiny();
  exp.train.steps = 4;
  std::vector<MetricRow> single_rows, multi_rows;
  exp.sink = [&](const MetricRow& r) { single_rows.push_back(r); };
  auto single = single_task_learner(exp, TaskId::kSpatial);
  single->train(exp.train, "pretrain", exp.sink);
  exp.sink = [&](const MetricRow& r) { multi_rows.push_back(r); };
  auto multi = multitask_learner(exp, {TaskId::kSpatial, TaskId::kGap}, {1.0, 0.0});
  multi->train(exp.train, "combine", exp.sink);
  expect_close(with_prefix(multi->parameters(), "trunk."), with_prefix(single->parameters(), "trunk."), 1e-6);
  expect_close(with_prefix(multi->parameters(), "A_spatial."), with_prefix(single->parameters(), "A_spatial."), 1e-6);
  const auto a = losses_of(single_rows, "A_spatial"), b = losses_of(multi_rows, "A_spatial");
  ASSERT_EQ(a.size(), b.size());
  for (size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-6);
}

TEST(Multitask, RejectsMixedModalities) {
  EXPECT_THROW(multitask_learner(tiny(), {TaskId::kSpatial, TaskId::kGlobal}, {1, 1}), ConfigError);
}

TEST(Concat, SlicesEqualStandaloneEncoders) {
  const auto exp = tiny();
  const std::vector<TaskId> tasks{TaskId::kSpatial, TaskId::kGap};
  auto cat = concat_strategy(exp, tasks);
  const auto& data = testkit::tiny_dataset();
  const nn::Var x = nn::Var::constant(ssl::trunk_input(*cat.trunk, data.test[0], 0, exp.ctx.input));
  const nn::Var batch = nn::reshape(x, {1, x.dim(0), x.dim(1), x.dim(2)});
  const auto out = cat.trunk->forward(batch);
  int offset = 0;
  for (TaskId t : tasks) {
    const auto alone = train_single(exp, t).trunk;
    const int d = alone->embedding_dim();
    EXPECT_EQ(nn::slice(out.pooled, 1, offset, d).value(), alone->forward(batch).pooled.value());
    offset += d;
  }
  EXPECT_EQ(offset, cat.trunk->embedding_dim());
}

TEST(Incremental, DistillationIsZeroAtSealTime) {
  const auto exp = tiny();
  IncrementalSession il(exp, TaskId::kSpatial);
  il.train_current(1.0, 2.0);
  const auto all = testkit::iota(static_cast<int>(testkit::tiny_dataset().train.size()));
  EXPECT_EQ(il_distill_value(il.learner(), 0, il.store(), all, 2.0), 0.0);
  il.add_task(TaskId::kGap);
  EXPECT_EQ(il_distill_value(il.learner(), 0, il.store(), all, 2.0), 0.0);
  il.train_current(1.0, 2.0);
  EXPECT_EQ(il_distill_value(il.learner(), 1, il.store(), all, 2.0), 0.0);
  EXPECT_GT(il_distill_value(il.learner(), 0, il.store(), all, 2.0), 0.0);
}

TEST(Incremental, ZeroLambdaIsNaiveFineTuning) {
  auto exp = tiny();
  exp.train.steps = 4;
  IncrementalSession il(exp, TaskId::kSpatial);
  il.train_current(0.0, 2.0);
  // Naive fine-tuning: a fresh learner on a copy of the trunk, only the new
  // task, and a fresh optimizer.
  auto naive = std::make_unique<Learner>(il.learner().trunk().clone(), exp.adam());
  Rng head = head_stream(exp.seed, "C_gap");
  naive->add(ssl::make_task(TaskId::kGap, exp.ctx, naive->trunk(), head), 1.0, batch_stream(exp.seed, "C_gap"));
  naive->train(exp.train, "combine", nullptr);

  il.add_task(TaskId::kGap);
  il.train_current(0.0, 2.0);
  expect_close(with_prefix(il.learner().parameters(), "trunk."), with_prefix(naive->parameters(), "trunk."), 1e-6);
  expect_close(with_prefix(il.learner().parameters(), "C_gap."), with_prefix(naive->parameters(), "C_gap."), 1e-6);
}

TEST(Incremental, OrderingIsEnforced) {
  const auto exp = tiny();
  IncrementalSession il(exp, TaskId::kSpatial);
  EXPECT_THROW(il.add_task(TaskId::kGap), Error);
  il.train_current(1.0, 2.0);
  il.add_task(TaskId::kGap);
  EXPECT_THROW(il_distill_term(il.learner(), {1}, 1, il.store(), 1.0, 2.0), Error);
  EXPECT_THROW(il_train(exp, {TaskId::kGap}, 1.0, 2.0), ConfigError);
}

TEST(Store, SealOnceAndRoundTrip) {
  testkit::TempDir dir("store");
  ResponseStore store;
  store.seal(TaskId::kGap, "vector", {"a", "b"}, nn::Tensor({2, 2}, {1, 2, 3, 4}), "h1");
  EXPECT_THROW(store.seal(TaskId::kGap, "vector", {"a"}, nn::Tensor({1, 2}), "h2"), Error);
  const std::vector<std::string> ids{"b"};
  EXPECT_EQ(store.lookup(TaskId::kGap, ids).data, (std::vector<double>{3, 4}));
  const std::vector<std::string> missing{"c"};
  EXPECT_THROW(store.lookup(TaskId::kGap, missing), Error);
  EXPECT_THROW(store.lookup(TaskId::kSpatial, ids), Error);
  store.save(dir.path() / "responses");
  EXPECT_EQ(ResponseStore::load(dir.path() / "responses"), store);
  const std::vector<std::string> all{"a", "b"};
  EXPECT_NO_THROW(store.check_covers(all));
  EXPECT_THROW(store.check_covers(ids), Error);
}

TEST(Distill, IdentityProjectionOfTheTeacherHasZeroLoss) {
  const auto exp = tiny();
  auto teacher = train_single(exp, TaskId::kGap);
  const auto bank = extract_bank(exp, {TaskId::kGap}, {teacher.trunk.get()});
  Rng rng(3);
  DistillObjective obj(exp, bank, {TaskId::kGap}, DistillMode::kEuclidean, 0.1, teacher.trunk->embedding_dim(), rng);
  obj.set_identity();
  const auto all = testkit::iota(static_cast<int>(testkit::tiny_dataset().train.size()));
  EXPECT_NEAR(obj.loss(*teacher.trunk, all).item(), 0.0, 1e-12);
  auto other = init_trunk(exp.encoders.sound, 77, "other");
  EXPECT_GT(obj.loss(*other, all).item(), 1e-3);
}

TEST(Distill, BankRowsAreUnitNorm) {
  const auto exp = tiny();
  auto teacher = train_single(exp, TaskId::kSpatial);
  const auto bank = extract_bank(exp, {TaskId::kSpatial}, {teacher.trunk.get()});
  const auto& e = bank.entry(TaskId::kSpatial);
  EXPECT_EQ(e.ids.size(), testkit::tiny_dataset().train.size());
  for (size_t r = 0; r < e.ids.size(); ++r) {
    double n = 0.0;
    for (int c = 0; c < e.dim; ++c) n += e.rows[static_cast<int64_t>(r) * e.dim + c] * e.rows[static_cast<int64_t>(r) * e.dim + c];
    EXPECT_NEAR(n, 1.0, 1e-12);
  }
}

TEST(ProgNet, EarlierColumnsStayFrozen) {
  const auto exp = tiny();
  auto first = prognet_column_learner(exp, {}, TaskId::kSpatial, 1.0);
  first->train(exp.train, "combine", nullptr);
  auto columns = prognet_columns(*first);
  const auto before = nn::snapshot(columns[0]->parameters());
  auto second = prognet_column_learner(exp, columns, TaskId::kGap, 1.0);
  second->train(exp.train, "combine", nullptr);
  const auto after = prognet_columns(*second);
  EXPECT_TRUE(nn::same_values(after[0]->parameters(), before));
  EXPECT_FALSE(nn::same_values(after[1]->parameters(), nn::snapshot(columns[0]->parameters())));
}

TEST(ProgNet, FirstColumnIsTheSingleTaskModel) {
  const auto exp = tiny();
  auto single = train_single(exp, TaskId::kGap);
  auto prog = prognet_train(exp, {TaskId::kGap});
  const auto& p = dynamic_cast<const nn::ProgressiveTrunk&>(*prog.trunk);
  EXPECT_TRUE(nn::same_values(p.column(0).parameters(), nn::snapshot(single.trunk->parameters())));
}

TEST(ProgNet, RejectsMixedModalities) {
  EXPECT_THROW(prognet_train(tiny(), {TaskId::kGap, TaskId::kGlobal}), ConfigError);
}

TEST(Strategies, EveryStrategyProducesARestorableTrunk) {
  const auto exp = tiny();
  for (Strategy s : kCombinerStrategies) {
    CombinerConfig cfg;
    cfg.strategy = s;
    cfg.tasks = {TaskId::kGlobal, TaskId::kDense};
    const auto r = run_strategy(exp, cfg);
    ASSERT_TRUE(r.trunk) << strategy_name(s);
    EXPECT_NO_THROW(r.state.check_finite());
    const auto trunk_values = nn::with_prefix(r.state.params, "trunk.");
    EXPECT_TRUE(nn::same_values(r.trunk->parameters(), trunk_values)) << strategy_name(s);
    EXPECT_EQ(r.responses.has_value(), s == Strategy::kIncremental);
    EXPECT_EQ(r.bank.has_value(), s == Strategy::kDistillEuclidean || s == Strategy::kDistillContrastive);
  }
}

TEST(Strategies, RunsAreDeterministic) {
  const auto exp = tiny(4);
  CombinerConfig cfg;
  cfg.strategy = Strategy::kIncremental;
  cfg.tasks = {TaskId::kGap, TaskId::kForeground};
  const auto a = run_strategy(exp, cfg);
  const auto b = run_strategy(exp, cfg);
  EXPECT_EQ(a.state, b.state);
  EXPECT_EQ(*a.responses, *b.responses);
}

TEST(Strategies, ConfigValidation) {
  CombinerConfig c;
  c.strategy = Strategy::kMultitask;
  c.tasks = {TaskId::kSpatial};
  EXPECT_THROW(c.validate(), ConfigError);
  c.tasks = {TaskId::kSpatial, TaskId::kSpatial};
  EXPECT_THROW(c.validate(), ConfigError);
  c.tasks = {TaskId::kSpatial, TaskId::kGap};
  c.weights = {0.0, 0.0};
  EXPECT_THROW(c.validate(), ConfigError);
  c.weights = {};
  c.lambda_old = -1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_EQ(parse_strategy("distill_contrastive"), Strategy::kDistillContrastive);
  EXPECT_THROW(parse_strategy("nope"), ConfigError);
}
