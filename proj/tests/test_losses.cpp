#include <gtest/gtest.h>

#include <cmath>
#include <deque>

#include "gradcheck.hpp"
#include "multissl/core/error.hpp"
#include "multissl/nn/ops.hpp"
#include "multissl/signal/slicing.hpp"
#include "multissl/ssl/losses.hpp"
#include "multissl/ssl/queue.hpp"

using namespace multissl;
using namespace multissl::ssl;
using nn::Tensor;
using nn::Var;
using testkit::random_tensor;

namespace {

Tensor unit_rows(Tensor t) { return nn::l2_normalize(Var::constant(std::move(t))).value(); }

double dot(const Tensor& a, int i, const Tensor& b, int j) {
  const int d = a.dim(1);
  double s = 0.0;
  for (int c = 0; c < d; ++c) s += a[i * d + c] * b[j * d + c];
  return s;
}

// Mean over anchors of -log(e^{s+} / sum e^{s}) with explicit loops.
double brute_info_nce(const Tensor& a, const Tensor& p, const Tensor* neg, double tau) {
  const int n = a.dim(0);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    std::vector<double> logits;
    double pos = 0.0;
    if (neg) {
      pos = dot(a, i, p, i) / tau;
      logits.push_back(pos);
      for (int k = 0; k < neg->dim(0); ++k) logits.push_back(dot(a, i, *neg, k) / tau);
    } else {
      for (int j = 0; j < n; ++j) logits.push_back(dot(a, i, p, j) / tau);
      pos = logits[static_cast<size_t>(i)];
    }
    double denom = 0.0;
    for (double l : logits) denom += std::exp(l);
    total += -(pos - std::log(denom));
  }
  return total / n;
}

}  // namespace

TEST(ClosedForm, UniformRotationLogitsGiveLogBins) {
  const Var logits = Var::constant(Tensor({5, 8}, -1.3));
  const std::vector<int> labels{0, 1, 5, 7, 3};
  EXPECT_NEAR(spatial_alignment_loss(logits, labels, 8).item(), std::log(8.0), 1e-12);
}

TEST(ClosedForm, EqualSimilaritiesGiveLogNPlusOne) {
  for (int negatives : {1, 4, 31}) {
    const Tensor a({2, 3}, std::vector<double>{1, 0, 0, 1, 0, 0});
    Tensor neg({negatives, 3}, 0.0);
    for (int k = 0; k < negatives; ++k) neg[k * 3] = 1.0;
    const double v = info_nce({Var::constant(a), Var::constant(a), Var::constant(neg)}, 0.07).item();
    EXPECT_NEAR(v, std::log(negatives + 1.0), 1e-12);
  }
}

TEST(ClosedForm, HuberAtReferencePoints) {
  const std::vector<double> deltas{0.0, 0.0, 0.0};
  const Tensor pred({3, 1}, std::vector<double>{0.0, 0.4, 2.0});
  // Mean of {0, 0.08, 1.5}.
  EXPECT_NEAR(temporal_gap_loss(Var::constant(pred), deltas, 1.0).item(), (0.0 + 0.08 + 1.5) / 3.0, 1e-15);
}

TEST(Oracle, InfoNceMatchesBruteForce) {
  Rng rng(21);
  for (int trial = 0; trial < 25; ++trial) {
    const int n = 2 + rng.uniform_int(5), d = 2 + rng.uniform_int(6), k = 1 + rng.uniform_int(9);
    const double tau = rng.uniform(0.05, 1.0);
    const Tensor a = unit_rows(random_tensor({n, d}, rng));
    const Tensor p = unit_rows(random_tensor({n, d}, rng));
    const Tensor neg = unit_rows(random_tensor({k, d}, rng));
    EXPECT_NEAR(info_nce({Var::constant(a), Var::constant(p), Var::constant(neg)}, tau).item(),
                brute_info_nce(a, p, &neg, tau), 1e-10);
    EXPECT_NEAR(info_nce({Var::constant(a), Var::constant(p), Var()}, tau).item(), brute_info_nce(a, p, nullptr, tau),
                1e-10);
    EXPECT_NEAR(global_contrastive_loss(Var::constant(a), p, neg, tau).item(), brute_info_nce(a, p, &neg, tau),
                1e-10);
  }
}

TEST(Oracle, DenseCorrespondenceIsPerSampleArgmax) {
  Rng rng(22);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 1 + rng.uniform_int(3), s = 1 + rng.uniform_int(5), d = 2 + rng.uniform_int(4);
    const Tensor q = unit_rows(random_tensor({n * s, d}, rng));
    const Tensor k = unit_rows(random_tensor({n * s, d}, rng));
    const auto match = dense_correspondence(q, k, s);
    for (int r = 0; r < n * s; ++r) {
      const int base = r / s * s;
      int best = base;
      for (int j = base; j < base + s; ++j) {
        if (dot(q, r, k, j) > dot(q, r, k, best)) best = j;
      }
      EXPECT_EQ(match[static_cast<size_t>(r)], best);
    }
  }
}

TEST(Oracle, DenseLossUsesMatchedKeysAsPositives) {
  Rng rng(23);
  const int n = 2, s = 3, d = 4;
  const Tensor q = unit_rows(random_tensor({n * s, d}, rng));
  const Tensor k = unit_rows(random_tensor({n * s, d}, rng));
  const Tensor neg = unit_rows(random_tensor({5, d}, rng));
  const auto match = dense_correspondence(q, k, s);
  Tensor pos({n * s, d});
  for (int r = 0; r < n * s; ++r) {
    for (int c = 0; c < d; ++c) pos[r * d + c] = k[match[static_cast<size_t>(r)] * d + c];
  }
  EXPECT_NEAR(dense_contrastive_loss(Var::constant(q), k, s, neg, 0.2).item(), brute_info_nce(q, pos, &neg, 0.2),
              1e-12);
}

TEST(Oracle, DenseRowsAreUnitChannelVectors) {
  Rng rng(24);
  const auto rows = dense_rows(Var::constant(random_tensor({2, 3, 2, 5}, rng))).value();
  ASSERT_EQ(rows.shape, (nn::Shape{20, 3}));
  for (int r = 0; r < 20; ++r) EXPECT_NEAR(dot(rows, r, rows, r), 1.0, 1e-12);
}

TEST(Oracle, ConstantHalfPredictorHuberIsOneOverTwentyFour) {
  // delta ~ U(0, 1): E[0.5 (delta - 0.5)^2] = 1/24. Standard error of the mean
  // of 0.5 (delta - 0.5)^2 over 10^5 draws is about 1e-4.
  Rng rng(25);
  const int n = 100000;
  std::vector<double> deltas;
  for (int i = 0; i < n; ++i) deltas.push_back(signal::slice_pair(10.0, 2.0, rng).delta);
  const double loss = temporal_gap_loss(Var::constant(Tensor({n, 1}, 0.5)), deltas, 1.0).item();
  EXPECT_NEAR(loss, 1.0 / 24.0, 5e-4);
}

TEST(Distillation, ZeroAtTargetAndPositiveElsewhere) {
  Rng rng(26);
  const Tensor t = random_tensor({4, 6}, rng);
  EXPECT_EQ(soft_target_distillation(Var::constant(t), t, 2.0).item(), 0.0);
  Tensor shifted = t;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 6; ++j) shifted[i * 6 + j] += 3.0;  // softmax is shift invariant per row
  }
  EXPECT_NEAR(soft_target_distillation(Var::constant(shifted), t, 2.0).item(), 0.0, 1e-12);
  EXPECT_GT(soft_target_distillation(Var::constant(random_tensor({4, 6}, rng)), t, 2.0).item(), 0.0);
}

TEST(Losses, RejectBadInputs) {
  const Var logits = Var::constant(Tensor({2, 8}));
  const std::vector<int> bad{0, 8};
  EXPECT_THROW(spatial_alignment_loss(logits, bad, 8), Error);
  const Var one = Var::constant(Tensor({1, 3}, 0.5));
  EXPECT_THROW(info_nce({one, one, Var()}, 0.1), Error);
  EXPECT_THROW(info_nce({one, one, Var()}, 0.0), Error);
  const std::vector<double> out_of_range{1.5};
  EXPECT_THROW(temporal_gap_loss(Var::constant(Tensor({1, 1})), out_of_range, 1.0), Error);
  EXPECT_THROW(dense_correspondence(Tensor({4, 2}), Tensor({6, 2}), 2), Error);
}

TEST(Gradients, EveryLossAndHeadPassesFiniteDifferences) {
  for (const auto& item : testkit::gradient_suite(20, 99)) {
    EXPECT_LT(item.worst, 1e-4) << item.name;
  }
}

TEST(KeyQueue, ReplayMatchesFifoOracle) {
  Rng rng(27);
  const int capacity = 12, dim = 3, batch = 4;
  KeyQueue q(capacity, dim, batch);
  std::deque<std::vector<double>> oracle(static_cast<size_t>(capacity), std::vector<double>(dim, 0.0));
  for (int step = 0; step < 11; ++step) {
    const Tensor keys = unit_rows(random_tensor({batch, dim}, rng));
    q.enqueue(keys);
    for (int r = 0; r < batch; ++r) {
      oracle.pop_front();
      oracle.emplace_back(keys.data.begin() + r * dim, keys.data.begin() + (r + 1) * dim);
    }
    const Tensor ordered = q.ordered();
    for (int i = 0; i < capacity; ++i) {
      for (int c = 0; c < dim; ++c) ASSERT_EQ(ordered[i * dim + c], oracle[static_cast<size_t>(i)][static_cast<size_t>(c)]);
    }
  }
  EXPECT_EQ(q.write_pointer(), (11 * batch) % capacity);
}

TEST(KeyQueue, RandomFillIsUnitNormAndCapacityChecked) {
  Rng rng(28);
  KeyQueue q(8, 5, 4);
  q.fill_random(rng);
  for (int r = 0; r < 8; ++r) EXPECT_NEAR(dot(q.entries(), r, q.entries(), r), 1.0, 1e-12);
  EXPECT_THROW(KeyQueue(10, 5, 4), Error);
  EXPECT_THROW(q.enqueue(Tensor({3, 5})), Error);
}
