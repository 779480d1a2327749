#include <gtest/gtest.h>

#include <cmath>

#include "fixtures.hpp"
#include "gradcheck.hpp"
#include "multissl/combine/strategy.hpp"
#include "multissl/core/error.hpp"
#include "multissl/downstream/harness.hpp"
#include "multissl/downstream/metrics.hpp"
#include "multissl/runner/selfcheck.hpp"

using namespace multissl;
using namespace multissl::downstream;
using nn::Tensor;
using testkit::random_tensor;

namespace {

// Brute force: per class, |P & G| / |P | G| over cell index sets.
double brute_miou(const std::vector<int>& pred, const std::vector<int>& gt, int classes) {
  double total = 0.0;
  int present = 0;
  for (int c = 0; c < classes; ++c) {
    int inter = 0, uni = 0;
    for (size_t i = 0; i < gt.size(); ++i) {
      const bool p = pred[i] == c, g = gt[i] == c;
      inter += p && g;
      uni += p || g;
    }
    if (uni == 0) continue;
    total += static_cast<double>(inter) / uni;
    ++present;
  }
  return present == 0 ? 1.0 : total / present;
}

// Householder reflection I - 2 v v^T / |v|^2 applied to every row.
Tensor reflect(const Tensor& x, const std::vector<double>& v) {
  const int d = x.dim(1);
  double vv = 0.0;
  for (double e : v) vv += e * e;
  Tensor out = x;
  for (int r = 0; r < x.dim(0); ++r) {
    double dot = 0.0;
    for (int c = 0; c < d; ++c) dot += x[r * d + c] * v[static_cast<size_t>(c)];
    for (int c = 0; c < d; ++c) out[r * d + c] -= 2.0 * dot / vv * v[static_cast<size_t>(c)];
  }
  return out;
}

EvalEnv tiny_env(int steps = 3) {
  EvalEnv env;
  env.data = &testkit::tiny_dataset();
  env.input = runner::tiny_experiment(testkit::tiny_dataset()).ctx.input;
  env.config.steps = steps;
  env.config.batch_size = 4;
  env.config.decoder_hidden = 8;
  env.config.probe.steps = 50;
  env.seed = 3;
  return env;
}

}  // namespace

TEST(Retrieval, WorkedExamples) {
  const Tensor a({3, 2}, std::vector<double>{1, 0, 0, 1, -1, 0});
  EXPECT_DOUBLE_EQ(retrieval_top1(a, a), 1.0);
  const Tensor scaled({3, 2}, std::vector<double>{5, 0, 0, 0.1, -2, 0});
  EXPECT_DOUBLE_EQ(retrieval_top1(a, scaled), 1.0);
  // Every query ties on two identical gallery rows; the lower index wins.
  const Tensor g({3, 2}, std::vector<double>{1, 0, 1, 0, 1, 0});
  EXPECT_DOUBLE_EQ(retrieval_top1(a, g), 1.0 / 3.0);
  EXPECT_THROW(retrieval_top1(Tensor({1, 2}, 1.0), Tensor({1, 2}, 1.0)), Error);
  EXPECT_THROW(retrieval_top1(a, Tensor({2, 2}, 1.0)), Error);
}

TEST(Retrieval, InvariantToOrthogonalMaps) {
  Rng rng(1);
  for (int trial = 0; trial < 10; ++trial) {
    const Tensor q = random_tensor({12, 5}, rng), g = random_tensor({12, 5}, rng);
    std::vector<double> v(5);
    for (auto& e : v) e = rng.normal();
    EXPECT_DOUBLE_EQ(retrieval_top1(reflect(q, v), reflect(g, v)), retrieval_top1(q, g));
  }
}

TEST(Retrieval, RandomEmbeddingsScoreChance) {
  // Binomial(trials * N, 1/N) pooled over independent draws.
  Rng rng(2);
  const int n = 16, trials = 1000;
  double hits = 0.0;
  for (int t = 0; t < trials; ++t) {
    hits += retrieval_top1(random_tensor({n, 8}, rng), random_tensor({n, 8}, rng)) * n;
  }
  const double total = static_cast<double>(n) * trials;
  const double p = 1.0 / n;
  EXPECT_NEAR(hits / total, p, 3.0 * std::sqrt(p * (1 - p) / total));
}

TEST(MeanIou, MatchesBruteForceOnRandomGrids) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const int classes = 1 + rng.uniform_int(5);
    const int cells = 1 + rng.uniform_int(60);
    std::vector<int> pred(static_cast<size_t>(cells)), gt(static_cast<size_t>(cells));
    for (auto& v : pred) v = rng.uniform_int(classes + 1);
    for (auto& v : gt) v = rng.uniform_int(classes + 1);
    EXPECT_NEAR(mean_iou(pred, gt, classes), brute_miou(pred, gt, classes), 1e-15);
  }
}

TEST(MeanIou, EdgeCases) {
  const std::vector<int> bg{2, 2, 2};
  EXPECT_DOUBLE_EQ(mean_iou(bg, bg, 2), 1.0);
  const std::vector<int> gt{0, 0, 1, 2}, pred{0, 2, 1, 1};
  // class 0: 1/2, class 1: 1/2.
  EXPECT_DOUBLE_EQ(mean_iou(pred, gt, 2), 0.5);
  EXPECT_THROW(mean_iou(std::vector<int>{0}, gt, 2), Error);
  EXPECT_THROW(mean_iou(std::vector<int>{3}, std::vector<int>{0}, 2), Error);
}

TEST(MeanIou, CountsAccumulateAcrossGrids) {
  Rng rng(4);
  std::vector<int> all_pred, all_gt;
  ConfusionCounts counts(3);
  for (int g = 0; g < 5; ++g) {
    std::vector<int> p(10), t(10);
    for (auto& v : p) v = rng.uniform_int(4);
    for (auto& v : t) v = rng.uniform_int(4);
    counts.add(p, t);
    all_pred.insert(all_pred.end(), p.begin(), p.end());
    all_gt.insert(all_gt.end(), t.begin(), t.end());
  }
  EXPECT_DOUBLE_EQ(counts.mean_iou(), brute_miou(all_pred, all_gt, 3));
}

TEST(S3r, ZeroPredictorScoresTheTargetPower) {
  Rng rng(5);
  const Tensor target = random_tensor({2, 4, 3, 5}, rng);
  double power = 0.0;
  for (double v : target.data) power += v * v;
  EXPECT_NEAR(mean_squared_error(Tensor(target.shape, 0.0), target), power / target.size(), 1e-14);
  EXPECT_EQ(mean_squared_error(target, target), 0.0);
}

TEST(Probe, SeparableClassesAreLearned) {
  Rng rng(6);
  const int n = 120, d = 6, classes = 3;
  auto make = [&](Tensor& x, std::vector<int>& y) {
    x = Tensor({n, d});
    y.resize(n);
    for (int i = 0; i < n; ++i) {
      y[static_cast<size_t>(i)] = i % classes;
      for (int c = 0; c < d; ++c) x[i * d + c] = 0.3 * rng.normal() + (c == i % classes ? 2.0 : 0.0);
    }
  };
  Tensor xtr, xte;
  std::vector<int> ytr, yte;
  make(xtr, ytr);
  make(xte, yte);
  EXPECT_GT(linear_probe(xtr, ytr, xte, yte, classes, {}), 0.95);
}

TEST(Probe, ShuffledLabelsStayAtChance) {
  Rng rng(7);
  const int n = 400, d = 5, classes = 4;
  double acc = 0.0;
  const int repeats = 5;
  for (int r = 0; r < repeats; ++r) {
    const Tensor xtr = random_tensor({n, d}, rng), xte = random_tensor({n, d}, rng);
    std::vector<int> ytr(n), yte(n);
    for (auto& v : ytr) v = rng.uniform_int(classes);
    for (auto& v : yte) v = rng.uniform_int(classes);
    acc += linear_probe(xtr, ytr, xte, yte, classes, {});
  }
  const double p = 1.0 / classes, total = static_cast<double>(n) * repeats;
  EXPECT_NEAR(acc / repeats, p, 3.0 * std::sqrt(p * (1 - p) / total));
}

TEST(Probe, NeedsTwoClasses) {
  const Tensor x({4, 2}, 1.0);
  const std::vector<int> y{1, 1, 1, 1};
  EXPECT_THROW(linear_probe(x, y, x, y, 3, {}), Error);
}

TEST(Ridge, RecoversALinearMap) {
  Rng rng(8);
  const Tensor x = random_tensor({40, 3}, rng);
  Tensor y({40, 2});
  for (int i = 0; i < 40; ++i) {
    y[i * 2] = 2.0 * x[i * 3] - x[i * 3 + 2] + 0.5;
    y[i * 2 + 1] = x[i * 3 + 1];
  }
  const Tensor pred = ridge_fit_predict(x, y, x, 1e-9);
  for (int64_t i = 0; i < y.size(); ++i) EXPECT_NEAR(pred[i], y[i], 1e-6);
}

TEST(Harness, ParsingAndConfig) {
  EXPECT_EQ(parse_harness("s3r"), Harness::kS3r);
  EXPECT_THROW(parse_harness("segmentation"), ConfigError);
  DownstreamConfig c;
  c.steps = -1;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Harness, EveryHarnessRunsOnASoundTrunk) {
  const auto env = tiny_env();
  const auto trunk = combine::init_trunk(runner::tiny_experiment(testkit::tiny_dataset()).encoders.sound, 1, "h");
  for (Harness h : kAllHarnesses) {
    const auto r = run_harness(h, *trunk, env);
    ASSERT_FALSE(r.metrics.empty()) << harness_name(h);
    for (const auto& [name, v] : r.metrics) EXPECT_TRUE(std::isfinite(v)) << harness_name(h) << " " << name;
  }
}

TEST(Harness, VisualTrunkServesRetrievalAndProbe) {
  const auto env = tiny_env();
  const auto trunk = combine::init_trunk(runner::tiny_experiment(testkit::tiny_dataset()).encoders.visual, 1, "h");
  EXPECT_NO_THROW(retrieval_eval(*trunk, env));
  EXPECT_NO_THROW(probe_eval(*trunk, env));
  EXPECT_THROW(semantic_eval(*trunk, env), ConfigError);
}

TEST(Harness, FrozenTrunkIsBitUnchanged) {
  auto env = tiny_env(4);
  env.config.finetune = false;
  const auto trunk = combine::init_trunk(runner::tiny_experiment(testkit::tiny_dataset()).encoders.sound, 1, "h");
  const auto before = nn::snapshot(trunk->parameters());
  for (Harness h : {Harness::kSemantic, Harness::kS3r}) {
    const auto r = run_harness(h, *trunk, env);
    ASSERT_TRUE(r.trunk);
    EXPECT_TRUE(nn::same_values(r.trunk->parameters(), before)) << harness_name(h);
  }
  EXPECT_TRUE(nn::same_values(trunk->parameters(), before));
  env.config.finetune = true;
  const auto tuned = run_harness(Harness::kS3r, *trunk, env);
  EXPECT_FALSE(nn::same_values(tuned.trunk->parameters(), before));
}

TEST(Harness, DescriptorsAreUnitNorm) {
  const auto env = tiny_env();
  const auto& s = testkit::tiny_dataset().test[0];
  for (const auto& d : {video_descriptor(s, 0, env.input), audio_descriptor(s, 0, env.input)}) {
    double n = 0.0, mean = 0.0;
    for (double v : d) {
      n += v * v;
      mean += v;
    }
    EXPECT_NEAR(n, 1.0, 1e-12);
    EXPECT_NEAR(mean / static_cast<double>(d.size()), 0.0, 1e-12);
  }
}

TEST(Harness, ResultsAreDeterministic) {
  const auto env = tiny_env();
  const auto trunk = combine::init_trunk(runner::tiny_experiment(testkit::tiny_dataset()).encoders.sound, 2, "h");
  for (Harness h : kAllHarnesses) {
    EXPECT_EQ(run_harness(h, *trunk, env).metrics, run_harness(h, *trunk, env).metrics) << harness_name(h);
  }
}
