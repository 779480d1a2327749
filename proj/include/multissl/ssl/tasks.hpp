#pragma once

#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "multissl/nn/encoder.hpp"
#include "multissl/nn/heads.hpp"
#include "multissl/scenegen/dataset.hpp"
#include "multissl/signal/slicing.hpp"
#include "multissl/ssl/augment.hpp"
#include "multissl/ssl/batches.hpp"
#include "multissl/ssl/queue.hpp"

namespace multissl::ssl {

enum class TaskId { kSpatial, kForeground, kGap, kGlobal, kDense };
inline constexpr TaskId kAllTasks[] = {TaskId::kSpatial, TaskId::kForeground, TaskId::kGap, TaskId::kGlobal,
                                       TaskId::kDense};

/// "A_spatial", "B_foreground", "C_gap", "M_global_contrastive",
/// "D_dense_contrastive".
const char* task_name(TaskId id);
char task_letter(TaskId id);
/// Accepts the full name or its letter.
TaskId parse_task(std::string_view s);
/// Comma-separated list, e.g. "B,C,A".
std::vector<TaskId> parse_task_list(std::string_view s);
std::string task_list_string(std::span<const TaskId> tasks);
/// Sound trunk for A/B/C, visual trunk for M/D.
nn::EncoderKind trunk_kind(TaskId id);

struct TaskHyper {
  int batch_size = 16;
  int rotation_bins = 8;
  int rotation_hidden = 128;
  double tau_foreground = 0.1;
  double tau_contrastive = 0.2;
  int queue_size = 1024;
  double momentum = 0.99;
  double huber_kappa = 1.0;
  /// Conv widths and embedding size of the auxiliary video and flow encoders
  /// owned by tasks A and B.
  std::vector<int> aux_channels{8, 16, 16, 16};
  int aux_dim = 16;
  AugmentConfig augment;

  void validate() const;
};

void to_json(nlohmann::json& j, const TaskHyper& h);
void from_json(const nlohmann::json& j, TaskHyper& h);

struct TaskContext {
  const scenegen::Dataset* data = nullptr;
  InputSpec input;
  TaskHyper hyper;
};

using Metrics = std::vector<std::pair<std::string, double>>;

struct TaskOutput {
  nn::Var loss;
  /// Train-split indices the batch was drawn from.
  std::vector<int> samples;
  Metrics metrics;
};

enum class ResponseKind { kLogits, kVector };

/// Anything a trainer can optimize together with a trunk.
class Objective {
 public:
  virtual ~Objective() = default;
  virtual std::string name() const = 0;
  /// Objective-owned parameters; the trunk is excluded.
  virtual nn::NamedParams parameters() const = 0;
  /// Draws one training batch from rng and builds its loss.
  virtual TaskOutput train_loss(const nn::Trunk& trunk, Rng& rng) = 0;
  /// Called after each optimizer update (momentum encoders, queues).
  virtual void after_update(const nn::Trunk& trunk) { (void)trunk; }
};

/// One pretext task: batch recipe, task-specific layers and loss. The trunk is
/// passed in on every call so one task object works with any trunk of the
/// right modality.
class PretextTask : public Objective {
 public:
  virtual TaskId id() const = 0;
  std::string name() const override { return task_name(id()); }

  /// Eval-mode head output for train samples on their canonical input,
  /// [n, k]. These are the responses incremental learning records.
  virtual nn::Var response(const nn::Trunk& trunk, std::span<const int> samples) const = 0;
  virtual ResponseKind response_kind() const = 0;

  /// Deterministic validation metrics on a split.
  virtual Metrics evaluate(const nn::Trunk& trunk, scenegen::Split split) const = 0;

  const TaskContext& context() const { return ctx_; }

 protected:
  explicit PretextTask(TaskContext ctx) : ctx_(std::move(ctx)) {}
  const std::vector<scenegen::AVSample>& train() const { return ctx_.data->train; }
  TaskContext ctx_;
};

/// Builds a task for a trunk; head weights come from head_rng. Throws when
/// the trunk's modality or the dataset cannot serve the task.
std::unique_ptr<PretextTask> make_task(TaskId id, const TaskContext& ctx, const nn::Trunk& trunk, Rng& head_rng);

/// Distillation loss against a recorded response: soft-target KL for logits,
/// mean squared error for vectors.
nn::Var distill_loss(ResponseKind kind, const nn::Var& response, const nn::Tensor& target, double temperature);

/// Canonical per-sample choices used by response() and evaluate().
int canonical_rotation(const std::string& sample_id, int bins);
signal::SlicePair canonical_pair(const std::string& sample_id, double clip_length, double slice_length);

/// Trunk input of a sample's segment: spectrogram for sound trunks, mean
/// frame for visual ones.
nn::Tensor trunk_input(const nn::Trunk& trunk, const scenegen::AVSample& s, int segment, const InputSpec& in);

}  // namespace multissl::ssl
