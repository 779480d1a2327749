#include "multissl/downstream/harness.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>

#include "multissl/combine/trainer.hpp"
#include "multissl/core/error.hpp"

namespace multissl::downstream {

using nlohmann::json;
using nn::Tensor;
using nn::Var;

namespace {

constexpr std::pair<Harness, const char*> kHarnessNames[] = {
    {Harness::kRetrieval, "retrieval"},
    {Harness::kSemantic, "semantic"},
    {Harness::kS3r, "s3r"},
    {Harness::kProbe, "probe"},
};

constexpr int kEvalChunk = 32;
constexpr int kDescriptorBins = 32;

struct SegmentRef {
  int sample;
  int segment;
};

std::vector<SegmentRef> all_segments(const std::vector<scenegen::AVSample>& split, const ssl::InputSpec& in) {
  std::vector<SegmentRef> out;
  for (size_t i = 0; i < split.size(); ++i) {
    for (int s = 0; s < in.segments(split[i]); ++s) out.push_back({static_cast<int>(i), s});
  }
  return out;
}

void require_sound_dense(const nn::Trunk& trunk, const char* harness) {
  if (trunk.config().kind != nn::EncoderKind::kSound) {
    throw ConfigError(std::string("the ") + harness + " harness needs a sound trunk");
  }
  if (!trunk.config().emit_dense) throw ConfigError(std::string("the ") + harness + " harness needs a dense map");
}

std::unique_ptr<nn::Trunk> prepared_clone(const nn::Trunk& trunk, bool trainable) {
  auto c = trunk.clone();
  nn::set_trainable(c->parameters(), trainable);
  return c;
}

/// Dense map of the trunk; with a frozen trunk the graph stops at its output.
Var dense_of(const nn::Trunk& trunk, const Tensor& input, bool trainable) {
  if (trainable) return trunk.forward(Var::constant(input)).dense;
  nn::NoGradGuard guard;
  return Var::constant(trunk.forward(Var::constant(input)).dense.value());
}

/// Base of the two decoder harnesses: a map head trained on random
/// (sample, segment) pairs of the train split.
class DecoderObjective : public ssl::Objective {
 public:
  DecoderObjective(const EvalEnv& env, nn::HeadSpec spec, Rng& rng, bool trainable)
      : env_(env), decoder_(std::move(spec), rng), trainable_(trainable) {}

  nn::NamedParams parameters() const override { return decoder_.parameters(); }

  ssl::TaskOutput train_loss(const nn::Trunk& trunk, Rng& rng) override {
    const auto& train = env_.data->train;
    ssl::TaskOutput out;
    out.samples = ssl::draw_distinct(static_cast<int>(train.size()), env_.config.batch_size, rng);
    std::vector<SegmentRef> refs;
    for (int i : out.samples) {
      refs.push_back({i, rng.uniform_int(env_.input.segments(train[static_cast<size_t>(i)]))});
    }
    out.loss = loss(trunk, train, refs);
    return out;
  }

  virtual Var loss(const nn::Trunk& trunk, const std::vector<scenegen::AVSample>& split,
                   const std::vector<SegmentRef>& refs) const = 0;

  const nn::Head& decoder() const { return decoder_; }

 protected:
  Tensor inputs(const std::vector<scenegen::AVSample>& split, const std::vector<SegmentRef>& refs) const {
    std::vector<Tensor> items;
    for (const auto& r : refs) items.push_back(ssl::sound_segment(split[static_cast<size_t>(r.sample)], r.segment, env_.input));
    return ssl::stack(items);
  }

  const EvalEnv& env_;
  nn::Head decoder_;
  bool trainable_;
};

class SemanticObjective final : public DecoderObjective {
 public:
  SemanticObjective(const EvalEnv& env, int dim, Rng& rng, bool trainable)
      : DecoderObjective(env, spec_for(env, dim), rng, trainable) {}

  std::string name() const override { return "semantic"; }

  int classes() const { return env_.data->config.num_classes; }
  int bins() const { return env_.data->config.semantic_bins; }
  int frames() const { return env_.input.frames_per_segment(env_.data->config.fps); }

  Var logits(const nn::Trunk& trunk, const std::vector<scenegen::AVSample>& split,
             const std::vector<SegmentRef>& refs) const {
    return semantic_logits(decoder_, dense_of(trunk, inputs(split, refs), trainable_), frames(), bins(), classes());
  }

  std::vector<int> labels(const std::vector<scenegen::AVSample>& split, const std::vector<SegmentRef>& refs) const {
    std::vector<int> out;
    for (const auto& r : refs) {
      const auto& s = split[static_cast<size_t>(r.sample)];
      if (s.semantic_bins != bins()) throw Error("label grid of sample " + s.id + " does not match the decoder bins");
      auto l = ssl::segment_labels(s, r.segment, env_.input, classes());
      out.insert(out.end(), l.begin(), l.end());
    }
    return out;
  }

  Var loss(const nn::Trunk& trunk, const std::vector<scenegen::AVSample>& split,
           const std::vector<SegmentRef>& refs) const override {
    const Var z = logits(trunk, split, refs);
    const auto y = labels(split, refs);
    if (static_cast<size_t>(z.dim(0)) != y.size()) throw Error("label grid and decoder output sizes differ");
    return nn::cross_entropy(z, y);
  }

 private:
  static nn::HeadSpec spec_for(const EvalEnv& env, int dim) {
    return nn::HeadSpec::semantic_decoder(dim, env.config.decoder_hidden,
                                          (env.data->config.num_classes + 1) * env.data->config.semantic_bins);
  }
};

class S3rObjective final : public DecoderObjective {
 public:
  S3rObjective(const EvalEnv& env, int dim, Rng& rng, bool trainable)
      : DecoderObjective(env, nn::HeadSpec::s3r_decoder(dim, env.config.decoder_hidden, 4), rng, trainable) {}

  std::string name() const override { return "s3r"; }

  Var prediction(const nn::Trunk& trunk, const std::vector<scenegen::AVSample>& split,
                 const std::vector<SegmentRef>& refs) const {
    const auto [f, t] = env_.input.spectrogram_size(env_.data->config.sample_rate);
    return s3r_prediction(decoder_, dense_of(trunk, inputs(split, refs), trainable_), f, t);
  }

  Tensor targets(const std::vector<scenegen::AVSample>& split, const std::vector<SegmentRef>& refs) const {
    std::vector<Tensor> items;
    for (const auto& r : refs) items.push_back(ssl::s3r_target(split[static_cast<size_t>(r.sample)], r.segment, env_.input));
    return ssl::stack(items);
  }

  Var loss(const nn::Trunk& trunk, const std::vector<scenegen::AVSample>& split,
           const std::vector<SegmentRef>& refs) const override {
    return nn::mse(prediction(trunk, split, refs), targets(split, refs));
  }
};

void check_env(const EvalEnv& env) {
  if (env.data == nullptr) throw Error("evaluation needs a dataset");
  if (env.data->train.empty() || env.data->test.empty()) throw ConfigError("evaluation needs train and test samples");
  env.config.validate();
}

/// Trains the decoder (and, when fine-tuning, the trunk clone) and returns the
/// learner for evaluation.
template <typename Obj>
std::unique_ptr<combine::Learner> train_decoder(const nn::Trunk& trunk, const EvalEnv& env, const char* label) {
  const bool trainable = env.config.finetune;
  nn::AdamConfig adam;
  adam.lr = env.config.lr;
  auto learner = std::make_unique<combine::Learner>(prepared_clone(trunk, trainable), adam);
  Rng root = Rng(env.seed).derive(std::string("downstream/") + label);
  Rng head = root.derive("head");
  learner->add(std::make_unique<Obj>(env, trunk.embedding_dim(), head, trainable), 1.0, root.derive("batch"));
  combine::TrainConfig tc;
  tc.steps = env.config.steps;
  tc.lr = env.config.lr;
  tc.log_every = std::max(1, env.config.steps / 10);
  if (tc.steps > 0) learner->train(tc, "downstream", env.sink);
  return learner;
}

template <typename F>
void for_chunks(const std::vector<SegmentRef>& refs, F&& f) {
  for (size_t b = 0; b < refs.size(); b += kEvalChunk) {
    f(std::vector<SegmentRef>(refs.begin() + static_cast<std::ptrdiff_t>(b),
                              refs.begin() + static_cast<std::ptrdiff_t>(std::min(refs.size(), b + kEvalChunk))));
  }
}

Tensor rows_to_tensor(const std::vector<std::vector<double>>& rows) {
  Tensor t({static_cast<int>(rows.size()), static_cast<int>(rows.front().size())});
  for (size_t i = 0; i < rows.size(); ++i) std::copy(rows[i].begin(), rows[i].end(), t.data.begin() + static_cast<std::ptrdiff_t>(i * rows[i].size()));
  return t;
}

Tensor pooled_embeddings(const nn::Trunk& trunk, const std::vector<scenegen::AVSample>& split,
                         const ssl::InputSpec& in) {
  nn::NoGradGuard guard;
  const int n = static_cast<int>(split.size());
  Tensor out({n, trunk.embedding_dim()});
  for (int b = 0; b < n; b += kEvalChunk) {
    std::vector<Tensor> items;
    for (int i = b; i < std::min(n, b + kEvalChunk); ++i) items.push_back(ssl::trunk_input(trunk, split[static_cast<size_t>(i)], 0, in));
    const Tensor z = trunk.forward(Var::constant(ssl::stack(items))).pooled.value();
    std::copy(z.data.begin(), z.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(b) * z.dim(1));
  }
  return out;
}

std::vector<double> normalized_centered(std::vector<double> v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double norm = 0.0;
  for (double& x : v) {
    x -= mean;
    norm += x * x;
  }
  norm = std::sqrt(norm);
  if (norm > 0.0) {
    for (double& x : v) x /= norm;
  }
  return v;
}

}  // namespace

const char* harness_name(Harness h) {
  for (const auto& [k, name] : kHarnessNames) {
    if (k == h) return name;
  }
  return "?";
}

Harness parse_harness(const std::string& s) {
  for (const auto& [k, name] : kHarnessNames) {
    if (s == name) return k;
  }
  throw ConfigError("unknown downstream harness '" + s + "' (expected retrieval, semantic, s3r or probe)");
}

void DownstreamConfig::validate() const {
  if (steps < 0) throw ConfigError("downstream.steps must be >= 0");
  if (!(lr > 0.0)) throw ConfigError("downstream.lr must be positive");
  if (batch_size < 1) throw ConfigError("downstream.batch_size must be >= 1");
  if (decoder_hidden < 1) throw ConfigError("downstream.decoder_hidden must be >= 1");
  if (!(ridge_alpha > 0.0)) throw ConfigError("downstream.ridge_alpha must be positive");
  if (probe.steps < 1 || !(probe.lr > 0.0) || probe.weight_decay < 0.0) {
    throw ConfigError("downstream.probe needs steps >= 1, lr > 0 and weight_decay >= 0");
  }
}

void to_json(json& j, const DownstreamConfig& c) {
  std::vector<std::string> names;
  for (auto h : c.harnesses) names.emplace_back(harness_name(h));
  j = json{{"harnesses", names},
           {"steps", c.steps},
           {"lr", c.lr},
           {"batch_size", c.batch_size},
           {"finetune", c.finetune},
           {"decoder_hidden", c.decoder_hidden},
           {"ridge_alpha", c.ridge_alpha},
           {"probe", {{"steps", c.probe.steps}, {"lr", c.probe.lr}, {"weight_decay", c.probe.weight_decay}}}};
}

void from_json(const json& j, DownstreamConfig& c) {
  c.harnesses.clear();
  for (const auto& h : j.at("harnesses")) c.harnesses.push_back(parse_harness(h.get<std::string>()));
  j.at("steps").get_to(c.steps);
  j.at("lr").get_to(c.lr);
  j.at("batch_size").get_to(c.batch_size);
  j.at("finetune").get_to(c.finetune);
  j.at("decoder_hidden").get_to(c.decoder_hidden);
  j.at("ridge_alpha").get_to(c.ridge_alpha);
  const auto& p = j.at("probe");
  p.at("steps").get_to(c.probe.steps);
  p.at("lr").get_to(c.probe.lr);
  p.at("weight_decay").get_to(c.probe.weight_decay);
}

Var semantic_logits(const nn::Head& decoder, const Var& dense, int frames, int bins, int classes) {
  if (dense.value().rank() != 4) throw Error("semantic decoder needs a dense map [N, d, F, T]");
  if (decoder.output_dim() != (classes + 1) * bins) {
    throw Error("semantic decoder emits " + std::to_string(decoder.output_dim()) + " channels, labels need " +
                std::to_string((classes + 1) * bins));
  }
  const int n = dense.dim(0), d = dense.dim(1), t = dense.dim(3);
  const Var profile = nn::reshape(nn::mean_axis(dense, 2), {n, d, 1, t});
  const Var maps = nn::upsample_nearest(decoder(profile), 1, frames);
  return nn::reshape(nn::channels_last(maps), {n * frames * bins, classes + 1});
}

Var s3r_prediction(const nn::Head& decoder, const Var& dense, int height, int width) {
  if (dense.value().rank() != 4) throw Error("s3r decoder needs a dense map [N, d, F, T]");
  return nn::upsample_nearest(decoder(dense), height, width);
}

std::vector<double> video_descriptor(const scenegen::AVSample& s, int segment, const ssl::InputSpec& in) {
  const auto frames = ssl::segment_frames(s, segment, in);
  std::vector<double> out;
  out.reserve(static_cast<size_t>(frames.count) * kDescriptorBins);
  const size_t plane = static_cast<size_t>(frames.height) * frames.width;
  for (int f = 0; f < frames.count; ++f) {
    const float* px = frames.pixels.data() + plane * static_cast<size_t>(f);
    for (int b = 0; b < kDescriptorBins; ++b) {
      const int x0 = b * frames.width / kDescriptorBins, x1 = (b + 1) * frames.width / kDescriptorBins;
      double acc = 0.0;
      for (int y = 0; y < frames.height; ++y) {
        for (int x = x0; x < x1; ++x) acc += px[static_cast<size_t>(y) * frames.width + x];
      }
      out.push_back(acc / (static_cast<double>(frames.height) * std::max(1, x1 - x0)));
    }
  }
  return normalized_centered(std::move(out));
}

std::vector<double> audio_descriptor(const scenegen::AVSample& s, int segment, const ssl::InputSpec& in) {
  const Tensor spec = ssl::sound_segment(s, segment, in);
  const int c = spec.dim(0), f = spec.dim(1), t = spec.dim(2);
  std::vector<double> out(static_cast<size_t>(c) * f, 0.0);
  for (int ch = 0; ch < c; ++ch) {
    for (int k = 0; k < f; ++k) {
      double acc = 0.0;
      for (int i = 0; i < t; ++i) acc += spec[(static_cast<int64_t>(ch) * f + k) * t + i];
      out[static_cast<size_t>(ch) * f + k] = acc / t;
    }
  }
  return normalized_centered(std::move(out));
}

HarnessResult retrieval_eval(const nn::Trunk& trunk, const EvalEnv& env) {
  check_env(env);
  if (env.data->test.size() < 2) throw ConfigError("retrieval needs at least 2 test samples");
  const bool sound = trunk.config().kind == nn::EncoderKind::kSound;
  auto descriptors = [&](const std::vector<scenegen::AVSample>& split) {
    std::vector<std::vector<double>> rows;
    for (const auto& s : split) rows.push_back(sound ? video_descriptor(s, 0, env.input) : audio_descriptor(s, 0, env.input));
    return rows_to_tensor(rows);
  };
  const Tensor emb_train = pooled_embeddings(trunk, env.data->train, env.input);
  const Tensor emb_test = pooled_embeddings(trunk, env.data->test, env.input);
  const Tensor desc_train = descriptors(env.data->train);
  const Tensor desc_test = descriptors(env.data->test);
  double top1 = 0.0;
  if (sound) {
    top1 = retrieval_top1(ridge_fit_predict(emb_train, desc_train, emb_test, env.config.ridge_alpha), desc_test);
  } else {
    top1 = retrieval_top1(ridge_fit_predict(desc_train, emb_train, desc_test, env.config.ridge_alpha), emb_test);
  }
  return {{{"top1", top1}}, trunk.clone()};
}

HarnessResult semantic_eval(const nn::Trunk& trunk, const EvalEnv& env) {
  check_env(env);
  require_sound_dense(trunk, "semantic");
  auto learner = train_decoder<SemanticObjective>(trunk, env, "semantic");
  const auto& obj = static_cast<const SemanticObjective&>(learner->objective(0));
  ConfusionCounts counts(obj.classes());
  nn::NoGradGuard guard;
  for_chunks(all_segments(env.data->test, env.input), [&](const std::vector<SegmentRef>& refs) {
    const Tensor z = obj.logits(learner->trunk(), env.data->test, refs).value();
    const int k = z.dim(1);
    std::vector<int> pred(static_cast<size_t>(z.dim(0)));
    for (int i = 0; i < z.dim(0); ++i) {
      int best = 0;
      for (int c = 1; c < k; ++c) {
        if (z[static_cast<int64_t>(i) * k + c] > z[static_cast<int64_t>(i) * k + best]) best = c;
      }
      pred[static_cast<size_t>(i)] = best;
    }
    counts.add(pred, obj.labels(env.data->test, refs));
  });
  return {{{"miou", counts.mean_iou()}}, learner->release_trunk()};
}

HarnessResult s3r_eval(const nn::Trunk& trunk, const EvalEnv& env) {
  check_env(env);
  require_sound_dense(trunk, "s3r");
  if (!env.data->has_s3r_targets()) throw ConfigError("the dataset has no rotated-microphone target channels");
  auto learner = train_decoder<S3rObjective>(trunk, env, "s3r");
  const auto& obj = static_cast<const S3rObjective&>(learner->objective(0));
  nn::NoGradGuard guard;
  double acc = 0.0;
  int64_t count = 0;
  for_chunks(all_segments(env.data->test, env.input), [&](const std::vector<SegmentRef>& refs) {
    const Tensor target = obj.targets(env.data->test, refs);
    acc += mean_squared_error(obj.prediction(learner->trunk(), env.data->test, refs).value(), target) *
           static_cast<double>(target.size());
    count += target.size();
  });
  return {{{"mse", acc / static_cast<double>(count)}}, learner->release_trunk()};
}

HarnessResult probe_eval(const nn::Trunk& trunk, const EvalEnv& env) {
  check_env(env);
  auto labels = [](const std::vector<scenegen::AVSample>& split) {
    std::vector<int> y;
    for (const auto& s : split) y.push_back(s.scene_class());
    return y;
  };
  const double acc = linear_probe(pooled_embeddings(trunk, env.data->train, env.input), labels(env.data->train),
                                  pooled_embeddings(trunk, env.data->test, env.input), labels(env.data->test),
                                  env.data->config.num_classes, env.config.probe);
  return {{{"top1", acc}}, trunk.clone()};
}

HarnessResult run_harness(Harness h, const nn::Trunk& trunk, const EvalEnv& env) {
  switch (h) {
    case Harness::kRetrieval: return retrieval_eval(trunk, env);
    case Harness::kSemantic: return semantic_eval(trunk, env);
    case Harness::kS3r: return s3r_eval(trunk, env);
    case Harness::kProbe: return probe_eval(trunk, env);
  }
  throw Error("unreachable harness");
}

void to_json(json& j, const Provenance& p) {
  j = json{{"strategy", p.strategy},
           {"tasks", p.tasks},
           {"seed", p.seed},
           {"step", p.step},
           {"checkpoint_hash", p.checkpoint_hash}};
}

void from_json(const json& j, Provenance& p) {
  j.at("strategy").get_to(p.strategy);
  j.at("tasks").get_to(p.tasks);
  j.at("seed").get_to(p.seed);
  j.at("step").get_to(p.step);
  j.at("checkpoint_hash").get_to(p.checkpoint_hash);
}

void to_json(json& j, const EvalReport& r) {
  j = json{{"harness", r.harness},
           {"metric", r.metric},
           {"value", r.value},
           {"provenance", r.provenance},
           {"wall_seconds", r.wall_seconds}};
}

void from_json(const json& j, EvalReport& r) {
  j.at("harness").get_to(r.harness);
  j.at("metric").get_to(r.metric);
  j.at("value").get_to(r.value);
  j.at("provenance").get_to(r.provenance);
  j.at("wall_seconds").get_to(r.wall_seconds);
}

}  // namespace multissl::downstream
