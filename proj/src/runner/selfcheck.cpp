#include "multissl/runner/selfcheck.hpp"

#include <unistd.h>

#include <cmath>
#include <functional>
#include <ostream>
#include <sstream>

#include "multissl/core/error.hpp"
#include "multissl/downstream/metrics.hpp"
#include "multissl/runner/checkpoint.hpp"
#include "multissl/runner/config.hpp"
#include "multissl/ssl/losses.hpp"

namespace multissl::runner {

namespace fs = std::filesystem;
using nn::Tensor;
using nn::Var;

scenegen::SceneGenConfig tiny_scene_config() {
  scenegen::SceneGenConfig c;
  c.sample_rate = 8000;
  c.duration = 2.0;
  c.fps = 4.0;
  c.height = 8;
  c.width = 64;
  c.semantic_bins = 8;
  c.min_sources = 1;
  c.max_sources = 1;
  c.azimuth_span = 120.0;
  c.min_speed = 5.0;
  c.max_speed = 10.0;
  c.train = 12;
  c.val = 6;
  c.test = 6;
  return c;
}

combine::Experiment tiny_experiment(const scenegen::Dataset& data, uint64_t seed) {
  combine::Experiment exp;
  exp.ctx.data = &data;
  exp.ctx.input.segment_seconds = 1.0;
  exp.ctx.input.window = 256;
  exp.ctx.input.hop = 128;
  auto& h = exp.ctx.hyper;
  h.batch_size = 4;
  h.rotation_hidden = 16;
  h.queue_size = 8;
  h.aux_channels = {4, 8};
  h.aux_dim = 8;
  nn::EncoderConfig sound;
  sound.kind = nn::EncoderKind::kSound;
  sound.input_channels = 2;
  sound.channels = {4, 8};
  sound.embedding_dim = 8;
  nn::EncoderConfig visual = sound;
  visual.kind = nn::EncoderKind::kVisual;
  visual.input_channels = 1;
  exp.encoders = {sound, visual};
  exp.train.steps = 3;
  exp.train.lr = 1e-3;
  exp.train.log_every = 1;
  exp.seed = seed;
  return exp;
}

namespace {

void expect(bool ok, const std::string& detail) {
  if (!ok) throw Error(detail);
}

void expect_near(double got, double want, double tol, const std::string& what) {
  if (!(std::abs(got - want) <= tol)) {
    std::ostringstream s;
    s << what << ": got " << got << ", expected " << want << " (tolerance " << tol << ")";
    throw Error(s.str());
  }
}

Tensor random_tensor(nn::Shape shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (auto& v : t.data) v = rng.normal();
  return t;
}

void check_closed_forms() {
  const Var logits = Var::constant(Tensor({3, 8}, 0.25));
  const std::vector<int> labels{0, 3, 7};
  expect_near(ssl::spatial_alignment_loss(logits, labels, 8).item(), std::log(8.0), 1e-12, "CE of uniform logits");
  Tensor e({2, 3}, 0.0);
  e.data = {1, 0, 0, 1, 0, 0};
  Tensor neg({5, 3}, 0.0);
  for (int i = 0; i < 5; ++i) neg[i * 3] = 1.0;
  const double nce = ssl::info_nce({Var::constant(e), Var::constant(e), Var::constant(neg)}, 0.2).item();
  expect_near(nce, std::log(6.0), 1e-12, "InfoNCE with equal similarities");
  expect_near(nn::huber_value(0.0, 1.0), 0.0, 1e-15, "Huber(0)");
  expect_near(nn::huber_value(0.4, 1.0), 0.08, 1e-15, "Huber(0.4)");
  expect_near(nn::huber_value(2.0, 1.0), 1.5, 1e-15, "Huber(2)");
}

void check_gradients() {
  Rng rng(11);
  nn::Head head(nn::HeadSpec::rotation_classifier(6, 5, 4), rng);
  const Tensor x = random_tensor({3, 6}, rng);
  const std::vector<int> labels{0, 2, 3};
  auto loss = [&] { return nn::cross_entropy(head(Var::constant(x)), labels); };
  const auto params = head.parameters();
  nn::zero_grads(params);
  nn::backward(loss());
  const double h = 1e-3;
  for (const auto& [name, p] : params) {
    for (int64_t i = 0; i < p.value().size(); ++i) {
      const double orig = p.value()[i];
      p.mutable_value()[i] = orig + h;
      const double up = loss().item();
      p.mutable_value()[i] = orig - h;
      const double down = loss().item();
      p.mutable_value()[i] = orig;
      const double fd = (up - down) / (2 * h);
      const double an = p.grad()[i];
      const double rel = std::abs(fd - an) / std::max(1e-8, std::abs(fd) + std::abs(an));
      expect(rel < 1e-4 || std::abs(fd - an) < 1e-10, "gradient of " + name + " off by relative " + std::to_string(rel));
    }
  }
}

void check_metric_examples() {
  Tensor a({4, 3});
  a.data = {1, 0, 0, 0, 1, 0, 0, 0, 1, 1, 1, 0};
  expect_near(downstream::retrieval_top1(a, a), 1.0, 0, "self retrieval");
  Tensor rev({4, 3});
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 3; ++j) rev[i * 3 + j] = a[(3 - i) * 3 + j];
  }
  expect_near(downstream::retrieval_top1(a, rev), 0.0, 0, "reversed retrieval");
  const std::vector<int> gt{0, 0, 1, 1}, pred{0, 0, 0, 0};
  expect_near(downstream::mean_iou(pred, gt, 2), 0.25, 1e-15, "mIoU worked example");
}

void check_config() {
  const RunConfig c = config_from_json(default_config_json());
  c.validate();
  bool rejected = false;
  try {
    parse_config_text("{\n  \"train\": {\n    \"stepz\": 3\n  }\n}\n", "inline");
  } catch (const ConfigError& e) {
    rejected = std::string(e.what()).find("inline:3") != std::string::npos;
  }
  expect(rejected, "unknown key not rejected with its line number");
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("multissl-verify-" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

void check_combiners(const scenegen::Dataset& data) {
  auto exp = tiny_experiment(data);
  const std::vector<ssl::TaskId> tasks{ssl::TaskId::kSpatial, ssl::TaskId::kGap};
  auto learner = combine::multitask_learner(exp, tasks, {0.7, 0.3});
  combine::Learner::StepResult r;
  learner->total_loss(r);
  const double sum = 0.7 * r.outputs[0].loss.item() + 0.3 * r.outputs[1].loss.item();
  expect_near(r.total, sum, 1e-12, "multitask total loss");

  combine::IncrementalSession il(exp, ssl::TaskId::kGap);
  il.train_current(1.0, 2.0);
  std::vector<int> all;
  for (size_t i = 0; i < data.train.size(); ++i) all.push_back(static_cast<int>(i));
  expect(combine::il_distill_value(il.learner(), 0, il.store(), all, 2.0) == 0.0,
         "distillation loss is not zero at seal time");

  auto single = combine::train_single(exp, ssl::TaskId::kGap);
  TempDir tmp;
  Checkpoint ckpt{{"abc", single.trunk->describe(), "single", {"C_gap"}, 1}, single.state};
  save_checkpoint(tmp.path / "c.bin", ckpt);
  expect(load_checkpoint(tmp.path / "c.bin", "abc") == ckpt, "checkpoint round trip differs");
  const auto trunk = restore_trunk(ckpt);
  expect(nn::same_values(trunk->parameters(), nn::snapshot(single.trunk->parameters())),
         "restored trunk differs from the trained one");
}

}  // namespace

std::vector<CheckResult> run_selfcheck(std::ostream& out) {
  std::vector<CheckResult> results;
  auto run = [&](const std::string& name, const std::function<void()>& f) {
    CheckResult r{name, true, {}};
    try {
      f();
    } catch (const std::exception& e) {
      r.pass = false;
      r.detail = e.what();
    }
    out << (r.pass ? "PASS " : "FAIL ") << name << (r.detail.empty() ? "" : ": " + r.detail) << "\n";
    results.push_back(r);
  };
  run("closed-form losses", check_closed_forms);
  run("head gradients vs central differences", check_gradients);
  run("retrieval and mIoU examples", check_metric_examples);
  run("default config and unknown-key rejection", check_config);
  scenegen::Dataset data;
  run("tiny dataset generation", [&] { data = scenegen::generate_in_memory(tiny_scene_config(), 5); });
  if (!data.train.empty()) run("combiner identities and checkpoint round trip", [&] { check_combiners(data); });
  int passed = 0;
  for (const auto& r : results) passed += r.pass;
  out << passed << "/" << results.size() << " checks passed\n";
  return results;
}

}  // namespace multissl::runner
