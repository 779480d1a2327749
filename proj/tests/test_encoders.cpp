#include <gtest/gtest.h>

#include <cmath>

#include <nlohmann/json.hpp>

#include "gradcheck.hpp"
#include "multissl/core/error.hpp"
#include "multissl/nn/encoder.hpp"
#include "multissl/nn/model_state.hpp"
#include "multissl/nn/ops.hpp"

using namespace multissl;
using namespace multissl::nn;
using testkit::random_tensor;

namespace {

EncoderConfig small(EncoderKind kind) {
  EncoderConfig c;
  c.kind = kind;
  c.input_channels = kind == EncoderKind::kSound ? 2 : 1;
  c.channels = {4, 6};
  c.embedding_dim = 8;
  return c;
}

// Independent count: 3x3 stages with bias, then the 1x1 projection.
int64_t expected_params(const EncoderConfig& c) {
  int64_t n = 0;
  int in = c.input_channels;
  for (int out : c.channels) {
    n += static_cast<int64_t>(in) * out * c.kernel * c.kernel + out;
    in = out;
  }
  return n + static_cast<int64_t>(in) * c.embedding_dim + c.embedding_dim;
}

}  // namespace

TEST(Encoder, DefaultParameterCounts) {
  Rng rng(1);
  EncoderConfig sound;
  EncoderConfig visual;
  visual.kind = EncoderKind::kVisual;
  visual.input_channels = 1;
  const ConvTrunk s(sound, rng), v(visual, rng);
  EXPECT_EQ(count_values(s.parameters()), 113808);
  EXPECT_EQ(count_values(v.parameters()), 113664);
  EXPECT_EQ(count_values(s.parameters()), expected_params(sound));
  EXPECT_EQ(count_values(v.parameters()), expected_params(visual));
}

TEST(Encoder, PooledIsMeanOfDense) {
  Rng rng(2);
  const ConvTrunk t(small(EncoderKind::kSound), rng);
  const auto out = t.forward(Var::constant(random_tensor({3, 2, 17, 9}, rng)));
  const auto& d = out.dense.value();
  const auto [h, w] = t.config().dense_size(17, 9);
  ASSERT_EQ(d.shape, (Shape{3, 8, h, w}));
  ASSERT_EQ(out.pooled.shape(), (Shape{3, 8}));
  for (int n = 0; n < 3; ++n) {
    for (int c = 0; c < 8; ++c) {
      double acc = 0.0;
      for (int i = 0; i < h * w; ++i) acc += d[(n * 8 + c) * h * w + i];
      EXPECT_NEAR(out.pooled.value()[n * 8 + c], acc / (h * w), 1e-12);
    }
  }
}

TEST(Encoder, DenseSizeHalvesPerStage) {
  const auto c = small(EncoderKind::kSound);
  EXPECT_EQ(c.dense_size(17, 9), (std::pair<int, int>{5, 3}));
  EXPECT_EQ(c.dense_size(16, 16), (std::pair<int, int>{4, 4}));
}

TEST(Encoder, OutputsAreFinite) {
  Rng rng(3);
  for (auto kind : {EncoderKind::kSound, EncoderKind::kVisual}) {
    const ConvTrunk t(small(kind), rng);
    const auto out = t.forward(Var::constant(random_tensor({2, small(kind).input_channels, 12, 20}, rng, 5.0)));
    for (double v : out.dense.value().data) EXPECT_TRUE(std::isfinite(v));
  }
}

TEST(Encoder, RejectsWrongChannelCount) {
  Rng rng(4);
  const ConvTrunk t(small(EncoderKind::kSound), rng);
  try {
    t.forward(Var::constant(Tensor({1, 1, 8, 8})));
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("input shape mismatch"), std::string::npos);
  }
}

TEST(Encoder, GradientsMatchFiniteDifferences) {
  Rng rng(5);
  const ConvTrunk t(small(EncoderKind::kVisual), rng);
  const Var x = Var::parameter(random_tensor({2, 1, 6, 7}, rng));
  const Var w = Var::constant(random_tensor({2, 8}, rng));
  std::vector<Var> leaves{x};
  for (const auto& [n, p] : t.parameters()) leaves.push_back(p);
  EXPECT_LT(testkit::gradient_error([&] { return sum(mul(t.forward(x).pooled, w)); }, leaves), 1e-6);
}

TEST(Encoder, DescribeRebuildsTheArchitecture) {
  Rng rng(6);
  const ConvTrunk t(small(EncoderKind::kSound), rng);
  const auto rebuilt = make_trunk(t.describe());
  ASSERT_EQ(rebuilt->parameters().size(), t.parameters().size());
  for (size_t i = 0; i < t.parameters().size(); ++i) {
    EXPECT_EQ(rebuilt->parameters()[i].first, t.parameters()[i].first);
    EXPECT_EQ(rebuilt->parameters()[i].second.shape(), t.parameters()[i].second.shape());
  }
}

TEST(Encoder, CloneIsDeep) {
  Rng rng(7);
  const ConvTrunk t(small(EncoderKind::kSound), rng);
  const auto c = t.clone();
  c->parameters()[0].second.mutable_value()[0] += 1.0;
  EXPECT_NE(c->parameters()[0].second.value()[0], t.parameters()[0].second.value()[0]);
}

TEST(Encoder, SameStreamSameWeights) {
  Rng a(9), b(9);
  const ConvTrunk x(small(EncoderKind::kSound), a), y(small(EncoderKind::kSound), b);
  EXPECT_TRUE(same_values(y.parameters(), snapshot(x.parameters())));
}

TEST(Momentum, UpdateFollowsTheEmaRule) {
  const Var q = Var::parameter(Tensor({3}, {1.0, 2.0, -4.0}));
  const Var k = Var::parameter(Tensor({3}, {0.0, 2.0, 4.0}));
  momentum_update({{"w", q}}, {{"w", k}}, 0.75);
  EXPECT_DOUBLE_EQ(k.value()[0], 0.25);
  EXPECT_DOUBLE_EQ(k.value()[1], 2.0);
  EXPECT_DOUBLE_EQ(k.value()[2], 2.0);
  momentum_update({{"w", q}}, {{"w", k}}, 0.0);
  EXPECT_EQ(k.value(), q.value());
  momentum_update({{"w", q}}, {{"w", k}}, 1.0);
  EXPECT_EQ(k.value(), q.value());
}

TEST(Momentum, RejectsIncongruentLists) {
  const Var a = Var::parameter(Tensor({2}));
  const Var b = Var::parameter(Tensor({3}));
  EXPECT_THROW(momentum_update({{"w", a}}, {{"w", b}}, 0.9), Error);
  EXPECT_THROW(momentum_update({{"w", a}}, {}, 0.9), Error);
}

TEST(ConcatTrunk, SlicesMatchMembersBitExactly) {
  Rng rng(10);
  std::vector<std::unique_ptr<Trunk>> members;
  members.push_back(std::make_unique<ConvTrunk>(small(EncoderKind::kSound), rng));
  auto wide = small(EncoderKind::kSound);
  wide.embedding_dim = 11;
  members.push_back(std::make_unique<ConvTrunk>(wide, rng));
  std::vector<const Trunk*> raw{members[0].get(), members[1].get()};
  const ConcatTrunk cat(std::move(members));
  EXPECT_EQ(cat.embedding_dim(), 19);
  const Var x = Var::constant(random_tensor({3, 2, 10, 12}, rng));
  const auto out = cat.forward(x);
  int offset = 0;
  for (const Trunk* m : raw) {
    const auto alone = m->forward(x);
    const int d = m->embedding_dim();
    EXPECT_EQ(slice(out.pooled, 1, offset, d).value(), alone.pooled.value());
    EXPECT_EQ(slice(out.dense, 1, offset, d).value(), alone.dense.value());
    offset += d;
  }
}

TEST(ProgressiveTrunk, MaskedLateralsReduceToTheLastColumn) {
  const auto cfg = small(EncoderKind::kSound);
  Rng r0(11), r1(12), r1_again(12);
  std::vector<std::unique_ptr<ConvTrunk>> cols;
  cols.push_back(std::make_unique<ConvTrunk>(cfg, r0));
  cols.push_back(std::make_unique<ConvTrunk>(cfg, r1, progressive_lateral_widths(cfg, 1)));
  const ConvTrunk standalone(cfg, r1_again);
  const ProgressiveTrunk prog(std::move(cols));
  Rng rng(13);
  const Var x = Var::constant(random_tensor({2, 2, 9, 11}, rng));
  const auto masked = prog.forward_masked(x, 0.0).pooled.value();
  const auto alone = standalone.forward(x).pooled.value();
  for (int64_t i = 0; i < alone.size(); ++i) EXPECT_NEAR(masked[i], alone[i], 1e-12);
  const auto open = prog.forward(x).pooled.value();
  double diff = 0.0;
  for (int64_t i = 0; i < alone.size(); ++i) diff += std::abs(open[i] - alone[i]);
  EXPECT_GT(diff, 1e-6);
}

TEST(ProgressiveTrunk, LateralWidthsFollowEarlierColumns) {
  const auto cfg = small(EncoderKind::kSound);
  EXPECT_EQ(progressive_lateral_widths(cfg, 0), (std::vector<int>{0, 0, 0}));
  EXPECT_EQ(progressive_lateral_widths(cfg, 2), (std::vector<int>{0, 8, 12}));
}
