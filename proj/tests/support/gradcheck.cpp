#include "gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "multissl/nn/heads.hpp"
#include "multissl/nn/ops.hpp"
#include "multissl/ssl/losses.hpp"

namespace multissl::testkit {

using nn::HeadSpec;
using nn::Tensor;
using nn::Var;

Tensor random_tensor(nn::Shape shape, Rng& rng, double scale) {
  Tensor t(std::move(shape));
  for (auto& v : t.data) v = scale * rng.normal();
  return t;
}

double gradient_error(const std::function<Var()>& loss, const std::vector<Var>& leaves, double h) {
  for (const auto& p : leaves) p.zero_grad();
  nn::backward(loss());
  double diff = 0.0, fd_norm = 0.0, an_norm = 0.0;
  for (const auto& p : leaves) {
    for (int64_t i = 0; i < p.value().size(); ++i) {
      const double orig = p.value()[i];
      p.mutable_value()[i] = orig + h;
      const double up = loss().item();
      p.mutable_value()[i] = orig - h;
      const double down = loss().item();
      p.mutable_value()[i] = orig;
      const double fd = (up - down) / (2.0 * h);
      const double an = p.has_grad() ? p.grad()[i] : 0.0;
      diff += (fd - an) * (fd - an);
      fd_norm += fd * fd;
      an_norm += an * an;
    }
  }
  const double denom = std::sqrt(fd_norm) + std::sqrt(an_norm);
  return denom < 1e-12 ? 0.0 : std::sqrt(diff) / denom;
}

namespace {

Tensor unit_rows(Tensor t) {
  const int d = t.dim(1);
  for (int r = 0; r < t.dim(0); ++r) {
    double n = 0.0;
    for (int j = 0; j < d; ++j) n += t[r * d + j] * t[r * d + j];
    n = std::sqrt(n);
    for (int j = 0; j < d; ++j) t[r * d + j] /= n;
  }
  return t;
}

int between(Rng& rng, int lo, int hi) { return lo + rng.uniform_int(hi - lo + 1); }

std::vector<int> random_labels(int n, int classes, Rng& rng) {
  std::vector<int> out(static_cast<size_t>(n));
  for (auto& v : out) v = rng.uniform_int(classes);
  return out;
}

/// sum(head(x) * w) over a random weighting of the outputs.
double head_case(HeadSpec spec, Rng& rng) {
  nn::Head head(spec, rng);
  const int n = between(rng, 1, 3);
  nn::Shape in{n, spec.widths.front()};
  if (spec.is_map_head()) {
    in.push_back(between(rng, 1, 3));
    in.push_back(between(rng, 1, 4));
  }
  const Var x = Var::parameter(random_tensor(in, rng));
  const Var probe = head(x);
  const Var w = Var::constant(random_tensor(probe.shape(), rng));
  std::vector<Var> leaves{x};
  for (const auto& [name, p] : head.parameters()) leaves.push_back(p);
  return gradient_error([&] { return nn::sum(nn::mul(head(x), w)); }, leaves);
}

using Case = std::function<double(Rng&)>;

std::vector<std::pair<std::string, Case>> cases() {
  std::vector<std::pair<std::string, Case>> out;
  out.emplace_back("spatial alignment cross-entropy", [](Rng& rng) {
    const int n = between(rng, 1, 5), bins = between(rng, 2, 8);
    const Var logits = Var::parameter(random_tensor({n, bins}, rng, 2.0));
    const auto labels = random_labels(n, bins, rng);
    return gradient_error([&] { return ssl::spatial_alignment_loss(logits, labels, bins); }, {logits});
  });
  out.emplace_back("InfoNCE with shared negatives", [](Rng& rng) {
    const int n = between(rng, 1, 4), d = between(rng, 2, 6), k = between(rng, 1, 6);
    const double tau = rng.uniform(0.1, 1.0);
    const Var a = Var::parameter(random_tensor({n, d}, rng));
    const Var p = Var::parameter(random_tensor({n, d}, rng));
    const Var neg = Var::parameter(random_tensor({k, d}, rng));
    return gradient_error(
        [&] { return ssl::info_nce({nn::l2_normalize(a), nn::l2_normalize(p), nn::l2_normalize(neg)}, tau); },
        {a, p, neg});
  });
  out.emplace_back("InfoNCE with in-batch negatives", [](Rng& rng) {
    const int n = between(rng, 2, 5), d = between(rng, 2, 6);
    const double tau = rng.uniform(0.1, 1.0);
    const Var a = Var::parameter(random_tensor({n, d}, rng));
    const Var p = Var::parameter(random_tensor({n, d}, rng));
    return gradient_error([&] { return ssl::info_nce({nn::l2_normalize(a), nn::l2_normalize(p), Var()}, tau); },
                          {a, p});
  });
  out.emplace_back("foreground alignment", [](Rng& rng) {
    const int n = between(rng, 2, 5), d = between(rng, 2, 6);
    const double tau = rng.uniform(0.05, 0.5);
    const Var a = Var::parameter(random_tensor({n, d}, rng));
    const Var v = Var::parameter(random_tensor({n, d}, rng));
    return gradient_error(
        [&] { return ssl::foreground_alignment_loss({nn::l2_normalize(a), nn::l2_normalize(v), Var()}, tau); },
        {a, v});
  });
  out.emplace_back("temporal gap Huber", [](Rng& rng) {
    const int n = between(rng, 1, 6);
    const double kappa = rng.uniform(0.2, 1.5);
    std::vector<double> deltas(static_cast<size_t>(n));
    for (auto& d : deltas) d = rng.uniform();
    Var pred = Var::parameter(random_tensor({n, 1}, rng, 1.5));
    // Keep residuals clear of the kink at |e| = kappa, where the curvature jumps.
    for (int i = 0; i < n; ++i) {
      double& p = pred.mutable_value()[i];
      const double e = p - deltas[static_cast<size_t>(i)];
      if (std::abs(std::abs(e) - kappa) < 0.05) p += e > 0 ? 0.1 : -0.1;
    }
    return gradient_error([&] { return ssl::temporal_gap_loss(pred, deltas, kappa); }, {pred});
  });
  out.emplace_back("global contrastive with queue", [](Rng& rng) {
    const int n = between(rng, 1, 4), d = between(rng, 2, 6), k = between(rng, 1, 8);
    const double tau = rng.uniform(0.1, 1.0);
    const Var q = Var::parameter(random_tensor({n, d}, rng));
    const Tensor keys = unit_rows(random_tensor({n, d}, rng));
    const Tensor queue = unit_rows(random_tensor({k, d}, rng));
    return gradient_error([&] { return ssl::global_contrastive_loss(nn::l2_normalize(q), keys, queue, tau); }, {q});
  });
  out.emplace_back("dense contrastive", [](Rng& rng) {
    const int n = between(rng, 1, 3), s = between(rng, 2, 4), d = between(rng, 3, 6), k = between(rng, 1, 6);
    const double tau = rng.uniform(0.1, 1.0);
    const Var q = Var::parameter(random_tensor({n * s, d}, rng));
    // Keys are a per-sample permutation of the queries plus small noise, so
    // the correspondence is far from any tie and stays fixed under the
    // finite-difference steps.
    const Tensor qn = nn::l2_normalize(Var::constant(q.value())).value();
    Tensor keys({n * s, d});
    for (int i = 0; i < n; ++i) {
      std::vector<int> perm(static_cast<size_t>(s));
      for (int j = 0; j < s; ++j) perm[static_cast<size_t>(j)] = j;
      rng.shuffle(perm);
      for (int j = 0; j < s; ++j) {
        for (int c = 0; c < d; ++c) {
          keys[(i * s + perm[static_cast<size_t>(j)]) * d + c] = qn[(i * s + j) * d + c] + 0.01 * rng.normal();
        }
      }
    }
    keys = unit_rows(keys);
    const Tensor neg = unit_rows(random_tensor({k, d}, rng));
    return gradient_error([&] { return ssl::dense_contrastive_loss(nn::l2_normalize(q), keys, s, neg, tau); }, {q});
  });
  out.emplace_back("soft-target distillation", [](Rng& rng) {
    const int n = between(rng, 1, 4), c = between(rng, 2, 8);
    const double temperature = rng.uniform(0.5, 4.0);
    const Var logits = Var::parameter(random_tensor({n, c}, rng, 2.0));
    const Tensor target = random_tensor({n, c}, rng, 2.0);
    return gradient_error([&] { return ssl::soft_target_distillation(logits, target, temperature); }, {logits});
  });
  out.emplace_back("mean squared error", [](Rng& rng) {
    const int n = between(rng, 1, 4), d = between(rng, 1, 6);
    const Var pred = Var::parameter(random_tensor({n, d}, rng));
    const Tensor target = random_tensor({n, d}, rng);
    return gradient_error([&] { return nn::mse(pred, target); }, {pred});
  });
  out.emplace_back("rotation classifier head", [](Rng& rng) {
    return head_case(HeadSpec::rotation_classifier(between(rng, 2, 6), between(rng, 2, 6), between(rng, 2, 8)), rng);
  });
  out.emplace_back("gap regressor head",
                   [](Rng& rng) { return head_case(HeadSpec::gap_regressor(between(rng, 2, 6)), rng); });
  out.emplace_back("projection head", [](Rng& rng) { return head_case(HeadSpec::projection(between(rng, 2, 6)), rng); });
  out.emplace_back("dense projection head",
                   [](Rng& rng) { return head_case(HeadSpec::dense_projection(between(rng, 2, 5)), rng); });
  out.emplace_back("semantic decoder head", [](Rng& rng) {
    return head_case(HeadSpec::semantic_decoder(between(rng, 2, 5), between(rng, 2, 5), between(rng, 2, 6)), rng);
  });
  out.emplace_back("S3R decoder head", [](Rng& rng) {
    return head_case(HeadSpec::s3r_decoder(between(rng, 2, 5), between(rng, 2, 5), 4), rng);
  });
  return out;
}

}  // namespace

std::vector<GradientItem> gradient_suite(int configurations, uint64_t seed) {
  std::vector<GradientItem> out;
  const Rng root(seed);
  for (const auto& [name, run] : cases()) {
    GradientItem item{name, configurations, 0.0};
    Rng rng = root.derive(name);
    for (int c = 0; c < configurations; ++c) item.worst = std::max(item.worst, run(rng));
    out.push_back(item);
  }
  return out;
}

}  // namespace multissl::testkit
