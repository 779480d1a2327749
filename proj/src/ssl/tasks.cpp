#include "multissl/ssl/tasks.hpp"

#include <algorithm>
#include <nlohmann/json.hpp>

#include "multissl/core/error.hpp"
#include "multissl/core/hash.hpp"
#include "multissl/ssl/losses.hpp"

namespace multissl::ssl {

using namespace nn;
using scenegen::AVSample;
using scenegen::Split;

namespace {

constexpr std::pair<TaskId, const char*> kNames[] = {
    {TaskId::kSpatial, "A_spatial"},
    {TaskId::kForeground, "B_foreground"},
    {TaskId::kGap, "C_gap"},
    {TaskId::kGlobal, "M_global_contrastive"},
    {TaskId::kDense, "D_dense_contrastive"},
};

constexpr int kEvalChunk = 32;

Var pooled(const Trunk& trunk, Tensor batch) { return trunk.forward(Var::constant(std::move(batch))).pooled; }

template <typename F>
void for_chunks(int n, int chunk, F&& f) {
  for (int b = 0; b < n; b += chunk) f(b, std::min(n, b + chunk));
}

double top1_agreement(const Tensor& a, const Tensor& v) {
  const int n = a.dim(0), d = a.dim(1);
  int hits = 0;
  for (int i = 0; i < n; ++i) {
    int best = 0;
    double best_s = -1e300;
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int c = 0; c < d; ++c) s += a[static_cast<int64_t>(i) * d + c] * v[static_cast<int64_t>(j) * d + c];
      if (s > best_s) {
        best_s = s;
        best = j;
      }
    }
    hits += best == i;
  }
  return static_cast<double>(hits) / n;
}

int segment_count(const TaskContext& ctx) {
  const int n = ctx.input.segments(ctx.data->train.front());
  if (n < 1) throw ConfigError("clips are shorter than one input segment");
  return n;
}

void require_trunk(TaskId id, const Trunk& trunk) {
  const auto want = trunk_kind(id);
  if (trunk.config().kind != want) {
    throw ConfigError(std::string("task ") + task_name(id) + " needs a " + encoder_kind_name(want) + " trunk, got " +
                      encoder_kind_name(trunk.config().kind));
  }
}

EncoderConfig aux_config(const TaskContext& ctx, EncoderKind kind, int dim) {
  EncoderConfig c;
  c.kind = kind;
  c.input_channels = 1;
  c.input_height = ctx.data->config.height;
  c.input_width = ctx.data->config.width;
  c.channels = ctx.hyper.aux_channels;
  c.embedding_dim = dim;
  c.emit_dense = true;
  return c;
}

// ---------------------------------------------------------------------------

class SpatialTask final : public PretextTask {
 public:
  SpatialTask(const TaskContext& ctx, const Trunk& trunk, Rng& rng)
      : PretextTask(ctx), bins_(ctx.hyper.rotation_bins) {
    if (ctx.data->config.width % bins_ != 0) {
      throw ConfigError("frame width " + std::to_string(ctx.data->config.width) + " is not divisible by " +
                        std::to_string(bins_) + " rotation bins");
    }
    auto cfg = aux_config(ctx, EncoderKind::kVisual, ctx.hyper.aux_dim);
    video_ = std::make_unique<ConvTrunk>(cfg, rng);
    const int columns = cfg.dense_size(cfg.input_height, cfg.input_width).second;
    head_ = Head(HeadSpec::rotation_classifier(cfg.embedding_dim * columns + trunk.embedding_dim(),
                                               ctx.hyper.rotation_hidden, bins_),
                 rng);
  }

  TaskId id() const override { return TaskId::kSpatial; }

  NamedParams parameters() const override {
    NamedParams p;
    append_params(p, "video.", video_->parameters());
    append_params(p, "head.", head_.parameters());
    return p;
  }

  /// Dense video columns (height-averaged) concatenated with pooled audio.
  Var logits(const Trunk& trunk, Tensor sound, Tensor frames) const {
    Var v = mean_axis(video_->forward(Var::constant(std::move(frames))).dense, 2);
    const int n = v.dim(0);
    v = reshape(v, {n, v.dim(1) * v.dim(2)});
    return head_(concat({v, pooled(trunk, std::move(sound))}, 1));
  }

  TaskOutput train_loss(const Trunk& trunk, Rng& rng) override {
    TaskOutput out;
    out.samples = draw_distinct(static_cast<int>(train().size()), ctx_.hyper.batch_size, rng);
    const int segs = segment_count(ctx_);
    std::vector<Tensor> sound, frames;
    std::vector<int> labels;
    for (int i : out.samples) {
      const auto& s = train()[static_cast<size_t>(i)];
      const int seg = rng.uniform_int(segs);
      const int r = rng.uniform_int(bins_);
      sound.push_back(sound_segment(s, seg, ctx_.input));
      frames.push_back(frame_segment(s, seg, ctx_.input, r, bins_));
      labels.push_back(r);
    }
    Var l = logits(trunk, stack(sound), stack(frames));
    out.loss = spatial_alignment_loss(l, labels, bins_);
    out.metrics.emplace_back("accuracy", accuracy(l.value(), labels));
    return out;
  }

  Var response(const Trunk& trunk, std::span<const int> samples) const override {
    std::vector<Tensor> sound, frames;
    for (int i : samples) {
      const auto& s = train().at(static_cast<size_t>(i));
      sound.push_back(sound_segment(s, 0, ctx_.input));
      frames.push_back(frame_segment(s, 0, ctx_.input, canonical_rotation(s.id, bins_), bins_));
    }
    return logits(trunk, stack(sound), stack(frames));
  }

  ResponseKind response_kind() const override { return ResponseKind::kLogits; }

  Metrics evaluate(const Trunk& trunk, Split split) const override {
    NoGradGuard guard;
    const auto& items = ctx_.data->split(split);
    const int segs = segment_count(ctx_);
    double loss = 0.0, correct = 0.0;
    for_chunks(static_cast<int>(items.size()), kEvalChunk, [&](int b, int e) {
      std::vector<Tensor> sound, frames;
      std::vector<int> labels;
      for (int i = b; i < e; ++i) {
        const auto& s = items[static_cast<size_t>(i)];
        const int r = canonical_rotation(s.id, bins_);
        sound.push_back(sound_segment(s, i % segs, ctx_.input));
        frames.push_back(frame_segment(s, i % segs, ctx_.input, r, bins_));
        labels.push_back(r);
      }
      Var l = logits(trunk, stack(sound), stack(frames));
      loss += spatial_alignment_loss(l, labels, bins_).item() * (e - b);
      correct += accuracy(l.value(), labels) * (e - b);
    });
    const double n = static_cast<double>(items.size());
    return {{"loss", loss / n}, {"accuracy", correct / n}};
  }

  static double accuracy(const Tensor& logits, const std::vector<int>& labels) {
    const int n = logits.dim(0), k = logits.dim(1);
    int hits = 0;
    for (int i = 0; i < n; ++i) {
      const double* row = logits.ptr() + static_cast<int64_t>(i) * k;
      hits += static_cast<int>(std::max_element(row, row + k) - row) == labels[static_cast<size_t>(i)];
    }
    return static_cast<double>(hits) / n;
  }

 private:
  int bins_;
  std::unique_ptr<ConvTrunk> video_;
  Head head_;
};

// ---------------------------------------------------------------------------

class ForegroundTask final : public PretextTask {
 public:
  ForegroundTask(const TaskContext& ctx, const Trunk& trunk, Rng& rng) : PretextTask(ctx) {
    const double fps = ctx.data->config.fps;
    if (ctx.input.frames_per_segment(fps) < 2) {
      throw ConfigError("task B_foreground needs at least 2 video frames per segment");
    }
    flow_ = std::make_unique<ConvTrunk>(aux_config(ctx, EncoderKind::kFlow, trunk.embedding_dim()), rng);
    proj_ = Head(HeadSpec::projection(trunk.embedding_dim()), rng);
  }

  TaskId id() const override { return TaskId::kForeground; }

  NamedParams parameters() const override {
    NamedParams p;
    append_params(p, "flow.", flow_->parameters());
    append_params(p, "proj.", proj_.parameters());
    return p;
  }

  Var audio_embedding(const Trunk& trunk, Tensor sound) const {
    return l2_normalize(proj_(pooled(trunk, std::move(sound))));
  }
  Var flow_embedding(Tensor flow) const { return l2_normalize(pooled(*flow_, std::move(flow))); }

  TaskOutput train_loss(const Trunk& trunk, Rng& rng) override {
    TaskOutput out;
    out.samples = draw_distinct(static_cast<int>(train().size()), ctx_.hyper.batch_size, rng);
    const int segs = segment_count(ctx_);
    std::vector<Tensor> sound, flow;
    for (int i : out.samples) {
      const auto& s = train()[static_cast<size_t>(i)];
      const int seg = rng.uniform_int(segs);
      sound.push_back(sound_segment(s, seg, ctx_.input));
      flow.push_back(flow_segment(s, seg, ctx_.input));
    }
    Var a = audio_embedding(trunk, stack(sound));
    Var v = flow_embedding(stack(flow));
    out.loss = foreground_alignment_loss({a, v, {}}, ctx_.hyper.tau_foreground);
    out.metrics.emplace_back("top1", top1_agreement(a.value(), v.value()));
    return out;
  }

  Var response(const Trunk& trunk, std::span<const int> samples) const override {
    std::vector<Tensor> sound;
    for (int i : samples) sound.push_back(sound_segment(train().at(static_cast<size_t>(i)), 0, ctx_.input));
    return audio_embedding(trunk, stack(sound));
  }

  ResponseKind response_kind() const override { return ResponseKind::kVector; }

  Metrics evaluate(const Trunk& trunk, Split split) const override {
    NoGradGuard guard;
    const auto& items = ctx_.data->split(split);
    const int segs = segment_count(ctx_);
    double loss = 0.0, top1 = 0.0;
    int chunks = 0;
    const int n = static_cast<int>(items.size());
    const int chunk = ctx_.hyper.batch_size;
    for_chunks(n - n % chunk, chunk, [&](int b, int e) {
      std::vector<Tensor> sound, flow;
      for (int i = b; i < e; ++i) {
        sound.push_back(sound_segment(items[static_cast<size_t>(i)], i % segs, ctx_.input));
        flow.push_back(flow_segment(items[static_cast<size_t>(i)], i % segs, ctx_.input));
      }
      Var a = audio_embedding(trunk, stack(sound));
      Var v = flow_embedding(stack(flow));
      loss += foreground_alignment_loss({a, v, {}}, ctx_.hyper.tau_foreground).item();
      top1 += top1_agreement(a.value(), v.value());
      ++chunks;
    });
    if (chunks == 0) throw Error("B_foreground evaluation needs at least one full batch");
    return {{"loss", loss / chunks}, {"top1", top1 / chunks}};
  }

 private:
  std::unique_ptr<ConvTrunk> flow_;
  Head proj_;
};

// ---------------------------------------------------------------------------

class GapTask final : public PretextTask {
 public:
  GapTask(const TaskContext& ctx, const Trunk& trunk, Rng& rng) : PretextTask(ctx) {
    if (ctx.data->config.duration <= ctx.input.segment_seconds) {
      throw ConfigError("task C_gap needs clips longer than one segment");
    }
    head_ = Head(HeadSpec::gap_regressor(2 * trunk.embedding_dim()), rng);
  }

  TaskId id() const override { return TaskId::kGap; }
  NamedParams parameters() const override {
    NamedParams p;
    append_params(p, "head.", head_.parameters());
    return p;
  }

  Var predict(const Trunk& trunk, Tensor first, Tensor second) const {
    return head_(concat({pooled(trunk, std::move(first)), pooled(trunk, std::move(second))}, 1));
  }

  struct Pairs {
    std::vector<Tensor> first, second;
    std::vector<double> deltas;
    void add(const AVSample& s, const signal::SlicePair& p, const InputSpec& in) {
      first.push_back(sound_at(s, p.first.t_start, in));
      second.push_back(sound_at(s, p.second.t_start, in));
      deltas.push_back(p.delta);
    }
  };

  TaskOutput train_loss(const Trunk& trunk, Rng& rng) override {
    TaskOutput out;
    out.samples = draw_distinct(static_cast<int>(train().size()), ctx_.hyper.batch_size, rng);
    Pairs pairs;
    for (int i : out.samples) {
      const auto& s = train()[static_cast<size_t>(i)];
      // slice_pair already returns the two slices in random order.
      pairs.add(s, signal::slice_pair(s.scene.duration, ctx_.input.segment_seconds, rng), ctx_.input);
    }
    Var pred = predict(trunk, stack(pairs.first), stack(pairs.second));
    out.loss = temporal_gap_loss(pred, pairs.deltas, ctx_.hyper.huber_kappa);
    out.metrics.emplace_back("mae", mean_abs_error(pred.value(), pairs.deltas));
    return out;
  }

  Var response(const Trunk& trunk, std::span<const int> samples) const override {
    Pairs pairs;
    for (int i : samples) {
      const auto& s = train().at(static_cast<size_t>(i));
      pairs.add(s, canonical_pair(s.id, s.scene.duration, ctx_.input.segment_seconds), ctx_.input);
    }
    return predict(trunk, stack(pairs.first), stack(pairs.second));
  }

  ResponseKind response_kind() const override { return ResponseKind::kVector; }

  Metrics evaluate(const Trunk& trunk, Split split) const override {
    NoGradGuard guard;
    const auto& items = ctx_.data->split(split);
    double loss = 0.0, mae = 0.0;
    for_chunks(static_cast<int>(items.size()), kEvalChunk, [&](int b, int e) {
      Pairs pairs;
      for (int i = b; i < e; ++i) {
        const auto& s = items[static_cast<size_t>(i)];
        pairs.add(s, canonical_pair(s.id, s.scene.duration, ctx_.input.segment_seconds), ctx_.input);
      }
      Var pred = predict(trunk, stack(pairs.first), stack(pairs.second));
      loss += temporal_gap_loss(pred, pairs.deltas, ctx_.hyper.huber_kappa).item() * (e - b);
      mae += mean_abs_error(pred.value(), pairs.deltas) * (e - b);
    });
    const double n = static_cast<double>(items.size());
    return {{"huber", loss / n}, {"mae", mae / n}};
  }

  static double mean_abs_error(const Tensor& pred, const std::vector<double>& deltas) {
    double acc = 0.0;
    for (size_t i = 0; i < deltas.size(); ++i) acc += std::abs(pred[static_cast<int64_t>(i)] - deltas[i]);
    return acc / static_cast<double>(deltas.size());
  }

 private:
  Head head_;
};

// ---------------------------------------------------------------------------

/// Shared machinery of the two momentum-contrast tasks: a momentum copy of
/// trunk and head, a key queue and pending keys of the last batch.
class MomentumTask : public PretextTask {
 public:
  MomentumTask(const TaskContext& ctx, const Trunk& trunk, Rng& rng, HeadSpec spec)
      : PretextTask(ctx),
        head_(std::move(spec), rng),
        queue_(ctx.hyper.queue_size, trunk.embedding_dim(), ctx.hyper.batch_size) {
    key_trunk_ = trunk.clone();
    set_trainable(key_trunk_->parameters(), false);
    key_head_ = head_.clone();
    set_trainable(key_head_.parameters(), false);
    Rng qrng = rng.derive("queue");
    queue_.fill_random(qrng);
  }

  NamedParams parameters() const override {
    NamedParams p;
    append_params(p, "proj.", head_.parameters());
    return p;
  }

  void after_update(const Trunk& trunk) override {
    NamedParams query, key;
    append_params(query, "trunk.", trunk.parameters());
    append_params(query, "proj.", head_.parameters());
    append_params(key, "trunk.", key_trunk_->parameters());
    append_params(key, "proj.", key_head_.parameters());
    momentum_update(query, key, ctx_.hyper.momentum);
    if (!pending_.empty()) queue_.enqueue(pending_);
    pending_ = Tensor();
  }

  const KeyQueue& queue() const { return queue_; }

 protected:
  /// Two augmented views of the mean frame of random segments.
  void draw_views(Rng& rng, TaskOutput& out, Tensor& v1, Tensor& v2) const {
    out.samples = draw_distinct(static_cast<int>(train().size()), ctx_.hyper.batch_size, rng);
    const int segs = segment_count(ctx_);
    std::vector<Tensor> a, b;
    for (int i : out.samples) {
      Tensor base = frame_segment(train()[static_cast<size_t>(i)], rng.uniform_int(segs), ctx_.input);
      a.push_back(augment_view(base, ctx_.hyper.augment, rng));
      b.push_back(augment_view(base, ctx_.hyper.augment, rng));
    }
    v1 = stack(a);
    v2 = stack(b);
  }

  /// Deterministic pair of views per sample for evaluation.
  void eval_views(const std::vector<AVSample>& items, int b, int e, Tensor& v1, Tensor& v2) const {
    const int segs = segment_count(ctx_);
    std::vector<Tensor> x, y;
    for (int i = b; i < e; ++i) {
      const auto& s = items[static_cast<size_t>(i)];
      Rng rng = Rng(fnv1a64(s.id)).derive("views");
      Tensor base = frame_segment(s, i % segs, ctx_.input);
      x.push_back(augment_view(base, ctx_.hyper.augment, rng));
      y.push_back(augment_view(base, ctx_.hyper.augment, rng));
    }
    v1 = stack(x);
    v2 = stack(y);
  }

  Tensor canonical_frames(std::span<const int> samples) const {
    std::vector<Tensor> f;
    for (int i : samples) f.push_back(frame_segment(train().at(static_cast<size_t>(i)), 0, ctx_.input));
    return stack(f);
  }

  Head head_;
  std::unique_ptr<Trunk> key_trunk_;
  Head key_head_;
  KeyQueue queue_;
  Tensor pending_;
};

class GlobalContrastTask final : public MomentumTask {
 public:
  GlobalContrastTask(const TaskContext& ctx, const Trunk& trunk, Rng& rng)
      : MomentumTask(ctx, trunk, rng, HeadSpec::projection(trunk.embedding_dim())) {}

  TaskId id() const override { return TaskId::kGlobal; }

  Var query(const Trunk& trunk, Tensor x) const { return l2_normalize(head_(pooled(trunk, std::move(x)))); }
  Tensor key(Tensor x) const {
    NoGradGuard guard;
    return l2_normalize(key_head_(pooled(*key_trunk_, std::move(x)))).value();
  }

  TaskOutput train_loss(const Trunk& trunk, Rng& rng) override {
    TaskOutput out;
    Tensor v1, v2;
    draw_views(rng, out, v1, v2);
    Var q = query(trunk, std::move(v1));
    Tensor k = key(std::move(v2));
    out.loss = global_contrastive_loss(q, k, queue_.entries(), ctx_.hyper.tau_contrastive);
    out.metrics.emplace_back("top1", top1_agreement(q.value(), k));
    pending_ = std::move(k);
    return out;
  }

  Var response(const Trunk& trunk, std::span<const int> samples) const override {
    return query(trunk, canonical_frames(samples));
  }
  ResponseKind response_kind() const override { return ResponseKind::kVector; }

  Metrics evaluate(const Trunk& trunk, Split split) const override {
    NoGradGuard guard;
    const auto& items = ctx_.data->split(split);
    double loss = 0.0, top1 = 0.0;
    for_chunks(static_cast<int>(items.size()), kEvalChunk, [&](int b, int e) {
      Tensor v1, v2;
      eval_views(items, b, e, v1, v2);
      Var q = query(trunk, std::move(v1));
      Tensor k = key(std::move(v2));
      loss += global_contrastive_loss(q, k, queue_.entries(), ctx_.hyper.tau_contrastive).item() * (e - b);
      top1 += top1_agreement(q.value(), k) * (e - b);
    });
    const double n = static_cast<double>(items.size());
    return {{"loss", loss / n}, {"top1", top1 / n}};
  }
};

class DenseContrastTask final : public MomentumTask {
 public:
  DenseContrastTask(const TaskContext& ctx, const Trunk& trunk, Rng& rng)
      : MomentumTask(ctx, trunk, rng, HeadSpec::dense_projection(trunk.embedding_dim())) {
    if (!trunk.config().emit_dense) throw ConfigError("task D_dense_contrastive needs a trunk with emit_dense");
  }

  TaskId id() const override { return TaskId::kDense; }

  /// Per-location normalized query rows and the location count.
  Var query(const Trunk& trunk, Tensor x, int& locations) const {
    Var d = head_(trunk.forward(Var::constant(std::move(x))).dense);
    locations = d.dim(2) * d.dim(3);
    return dense_rows(d);
  }
  /// Key rows and pooled keys for the queue.
  void key(Tensor x, Tensor& rows, Tensor& pooled_keys) const {
    NoGradGuard guard;
    Var d = key_head_(key_trunk_->forward(Var::constant(std::move(x))).dense);
    rows = dense_rows(d).value();
    pooled_keys = l2_normalize(spatial_mean(d)).value();
  }

  TaskOutput train_loss(const Trunk& trunk, Rng& rng) override {
    TaskOutput out;
    Tensor v1, v2, rows, pooled_keys;
    draw_views(rng, out, v1, v2);
    int locations = 0;
    Var q = query(trunk, std::move(v1), locations);
    key(std::move(v2), rows, pooled_keys);
    out.loss = dense_contrastive_loss(q, rows, locations, queue_.entries(), ctx_.hyper.tau_contrastive);
    pending_ = std::move(pooled_keys);
    return out;
  }

  Var response(const Trunk& trunk, std::span<const int> samples) const override {
    int locations = 0;
    Var q = query(trunk, canonical_frames(samples), locations);
    return reshape(q, {static_cast<int>(samples.size()), locations * q.dim(1)});
  }
  ResponseKind response_kind() const override { return ResponseKind::kVector; }

  Metrics evaluate(const Trunk& trunk, Split split) const override {
    NoGradGuard guard;
    const auto& items = ctx_.data->split(split);
    double loss = 0.0;
    for_chunks(static_cast<int>(items.size()), kEvalChunk, [&](int b, int e) {
      Tensor v1, v2, rows, pooled_keys;
      eval_views(items, b, e, v1, v2);
      int locations = 0;
      Var q = query(trunk, std::move(v1), locations);
      key(std::move(v2), rows, pooled_keys);
      loss += dense_contrastive_loss(q, rows, locations, queue_.entries(), ctx_.hyper.tau_contrastive).item() *
              (e - b);
    });
    return {{"loss", loss / static_cast<double>(items.size())}};
  }
};

}  // namespace

// ---------------------------------------------------------------------------

const char* task_name(TaskId id) {
  for (const auto& [t, name] : kNames) {
    if (t == id) return name;
  }
  return "?";
}

char task_letter(TaskId id) { return task_name(id)[0]; }

TaskId parse_task(std::string_view s) {
  for (const auto& [t, name] : kNames) {
    if (s == name || (s.size() == 1 && s[0] == name[0])) return t;
  }
  throw ConfigError("unknown task '" + std::string(s) + "' (expected one of A_spatial, B_foreground, C_gap, "
                    "M_global_contrastive, D_dense_contrastive or their letters)");
}

std::vector<TaskId> parse_task_list(std::string_view s) {
  std::vector<TaskId> out;
  size_t start = 0;
  while (start <= s.size()) {
    const size_t comma = s.find(',', start);
    const auto item = s.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    if (item.empty()) throw ConfigError("empty entry in task list '" + std::string(s) + "'");
    out.push_back(parse_task(item));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string task_list_string(std::span<const TaskId> tasks) {
  std::string out;
  for (size_t i = 0; i < tasks.size(); ++i) {
    if (i) out += ',';
    out += task_letter(tasks[i]);
  }
  return out;
}

EncoderKind trunk_kind(TaskId id) {
  return id == TaskId::kGlobal || id == TaskId::kDense ? EncoderKind::kVisual : EncoderKind::kSound;
}

void TaskHyper::validate() const {
  if (batch_size < 2) throw ConfigError("tasks.batch_size must be at least 2");
  if (rotation_bins < 2) throw ConfigError("tasks.rotation_bins must be at least 2");
  if (rotation_hidden < 1) throw ConfigError("tasks.rotation_hidden must be positive");
  if (!(tau_foreground > 0.0) || !(tau_contrastive > 0.0)) throw ConfigError("task temperatures must be positive");
  if (!(huber_kappa > 0.0)) throw ConfigError("tasks.huber_kappa must be positive");
  if (!(momentum >= 0.0 && momentum <= 1.0)) throw ConfigError("tasks.momentum must be in [0, 1]");
  if (queue_size < batch_size || queue_size % batch_size != 0) {
    throw ConfigError("tasks.queue_size must be a multiple of tasks.batch_size");
  }
  if (aux_channels.size() < 2 || aux_dim < 8) throw ConfigError("tasks.aux encoder needs >= 2 stages and dim >= 8");
}

void to_json(nlohmann::json& j, const TaskHyper& h) {
  j = nlohmann::json{{"batch_size", h.batch_size},
                     {"rotation_bins", h.rotation_bins},
                     {"rotation_hidden", h.rotation_hidden},
                     {"tau_foreground", h.tau_foreground},
                     {"tau_contrastive", h.tau_contrastive},
                     {"queue_size", h.queue_size},
                     {"momentum", h.momentum},
                     {"huber_kappa", h.huber_kappa},
                     {"aux_channels", h.aux_channels},
                     {"aux_dim", h.aux_dim},
                     {"augment",
                      {{"min_crop", h.augment.min_crop},
                       {"brightness", h.augment.brightness},
                       {"offset", h.augment.offset},
                       {"circular_shift", h.augment.circular_shift}}}};
}

void from_json(const nlohmann::json& j, TaskHyper& h) {
  j.at("batch_size").get_to(h.batch_size);
  j.at("rotation_bins").get_to(h.rotation_bins);
  j.at("rotation_hidden").get_to(h.rotation_hidden);
  j.at("tau_foreground").get_to(h.tau_foreground);
  j.at("tau_contrastive").get_to(h.tau_contrastive);
  j.at("queue_size").get_to(h.queue_size);
  j.at("momentum").get_to(h.momentum);
  j.at("huber_kappa").get_to(h.huber_kappa);
  j.at("aux_channels").get_to(h.aux_channels);
  j.at("aux_dim").get_to(h.aux_dim);
  const auto& a = j.at("augment");
  a.at("min_crop").get_to(h.augment.min_crop);
  a.at("brightness").get_to(h.augment.brightness);
  a.at("offset").get_to(h.augment.offset);
  a.at("circular_shift").get_to(h.augment.circular_shift);
}

std::unique_ptr<PretextTask> make_task(TaskId id, const TaskContext& ctx, const Trunk& trunk, Rng& head_rng) {
  if (ctx.data == nullptr || ctx.data->train.empty()) throw ConfigError("tasks need a non-empty training split");
  ctx.hyper.validate();
  ctx.input.validate();
  require_trunk(id, trunk);
  if (static_cast<int>(ctx.data->train.size()) < ctx.hyper.batch_size) {
    throw ConfigError("training split has fewer samples than tasks.batch_size");
  }
  switch (id) {
    case TaskId::kSpatial: return std::make_unique<SpatialTask>(ctx, trunk, head_rng);
    case TaskId::kForeground: return std::make_unique<ForegroundTask>(ctx, trunk, head_rng);
    case TaskId::kGap: return std::make_unique<GapTask>(ctx, trunk, head_rng);
    case TaskId::kGlobal: return std::make_unique<GlobalContrastTask>(ctx, trunk, head_rng);
    case TaskId::kDense: return std::make_unique<DenseContrastTask>(ctx, trunk, head_rng);
  }
  throw Error("unreachable task id");
}

Var distill_loss(ResponseKind kind, const Var& response, const Tensor& target, double temperature) {
  if (kind == ResponseKind::kLogits) return soft_target_distillation(response, target, temperature);
  return mse(response, target);
}

int canonical_rotation(const std::string& sample_id, int bins) {
  return static_cast<int>(fnv1a64(sample_id) % static_cast<uint64_t>(bins));
}

signal::SlicePair canonical_pair(const std::string& sample_id, double clip_length, double slice_length) {
  Rng rng = Rng(fnv1a64(sample_id)).derive("gap");
  return signal::slice_pair(clip_length, slice_length, rng);
}

Tensor trunk_input(const Trunk& trunk, const AVSample& s, int segment, const InputSpec& in) {
  if (trunk.config().kind == EncoderKind::kSound) return sound_segment(s, segment, in);
  return frame_segment(s, segment, in);
}

}  // namespace multissl::ssl
