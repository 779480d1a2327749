#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "multissl/combine/store.hpp"
#include "multissl/combine/trainer.hpp"

namespace multissl::combine {

enum class Strategy {
  kSingle,
  kConcat,
  kMultitask,
  kIncremental,
  kDistillEuclidean,
  kDistillContrastive,
  kProgNet,
};
inline constexpr Strategy kCombinerStrategies[] = {Strategy::kConcat,           Strategy::kMultitask,
                                                   Strategy::kIncremental,      Strategy::kDistillEuclidean,
                                                   Strategy::kDistillContrastive, Strategy::kProgNet};

/// single, concat, multitask, il, distill_euclidean, distill_contrastive,
/// prognet
const char* strategy_name(Strategy s);
Strategy parse_strategy(const std::string& s);

struct CombinerConfig {
  Strategy strategy = Strategy::kMultitask;
  /// Ordered; the order matters for il and prognet.
  std::vector<ssl::TaskId> tasks;
  /// Multitask weights; empty means uniform.
  std::vector<double> weights;
  double lambda_old = 1.0;
  /// Soft-target temperature of incremental-learning distillation.
  double distill_temperature = 2.0;
  /// Temperature of contrastive feature distillation.
  double distill_tau = 0.1;

  void validate() const;
  std::vector<double> effective_weights() const;
};

void to_json(nlohmann::json& j, const CombinerConfig& c);
void from_json(const nlohmann::json& j, CombinerConfig& c);

struct EncoderSet {
  nn::EncoderConfig sound;
  nn::EncoderConfig visual;
  const nn::EncoderConfig& for_kind(nn::EncoderKind k) const;
  const nn::EncoderConfig& for_task(ssl::TaskId t) const { return for_kind(ssl::trunk_kind(t)); }
};

/// Everything a strategy run needs.
struct Experiment {
  ssl::TaskContext ctx;
  EncoderSet encoders;
  TrainConfig train;
  uint64_t seed = 0;
  MetricSink sink;

  nn::AdamConfig adam() const;
  void emit(const MetricRow& row) const {
    if (sink) sink(row);
  }
};

/// Output of any strategy. `trunk` is the artifact every downstream harness
/// consumes; `state` holds the parameters (and optimizer state) to persist.
struct StrategyResult {
  std::unique_ptr<nn::Trunk> trunk;
  nn::ModelState state;
  std::optional<ResponseStore> responses;
  std::optional<FeatureBank> bank;
};

// Single task ---------------------------------------------------------------

/// Trunk from Rng(seed).derive("trunk/<task>"), head from "head/<task>",
/// batches from "batch/<task>".
std::unique_ptr<Learner> single_task_learner(const Experiment& exp, ssl::TaskId task);
StrategyResult train_single(const Experiment& exp, ssl::TaskId task);
/// Logs evaluate(val) of every pretext objective of the learner.
void log_validation(const Experiment& exp, const Learner& learner);

// Concatenation -------------------------------------------------------------

std::unique_ptr<nn::ConcatTrunk> concat_encoder(std::vector<std::unique_ptr<nn::Trunk>> trunks);
StrategyResult concat_strategy(const Experiment& exp, const std::vector<ssl::TaskId>& tasks);

// Multi-task ----------------------------------------------------------------

/// Shared trunk initialized like the first task's single-task trunk; one
/// batch per task per step; total loss sum_k w_k L_k.
std::unique_ptr<Learner> multitask_learner(const Experiment& exp, const std::vector<ssl::TaskId>& tasks,
                                           const std::vector<double>& weights);
StrategyResult multitask_train(const Experiment& exp, const std::vector<ssl::TaskId>& tasks,
                               const std::vector<double>& weights);

// Incremental learning ------------------------------------------------------

/// Records objective k's eval-mode responses for every training sample and
/// seals them in the store.
void il_seal_task(const Learner& learner, size_t k, ResponseStore& store);

/// lambda_old * sum over previous objectives of their distillation loss on
/// the new task's batch samples against the store.
Learner::ExtraLoss il_distill_term(const Learner& learner, std::vector<size_t> previous, size_t current,
                                   const ResponseStore& store, double lambda_old, double temperature);

/// Current distillation loss of objective k on the given train samples.
double il_distill_value(const Learner& learner, size_t k, const ResponseStore& store, std::span<const int> samples,
                        double temperature);

/// Incremental session: tasks are added one at a time on a shared trunk.
class IncrementalSession {
 public:
  IncrementalSession(const Experiment& exp, ssl::TaskId first);
  /// Trains the newest task (with distillation of all sealed ones) and seals it.
  void train_current(double lambda_old, double temperature);
  /// Adds the next task; the previous ones become inactive objectives and the
  /// optimizer restarts.
  void add_task(ssl::TaskId task);

  Learner& learner() { return *learner_; }
  const ResponseStore& store() const { return store_; }
  const std::vector<ssl::TaskId>& tasks() const { return tasks_; }

 private:
  const Experiment& exp_;
  std::unique_ptr<Learner> learner_;
  ResponseStore store_;
  std::vector<ssl::TaskId> tasks_;
};

StrategyResult il_train(const Experiment& exp, const std::vector<ssl::TaskId>& tasks, double lambda_old,
                        double temperature);

// Feature distillation ------------------------------------------------------

enum class DistillMode { kEuclidean, kContrastive };

/// Normalized pooled embedding of each training sample's canonical input
/// under each task's trunk.
FeatureBank extract_bank(const Experiment& exp, const std::vector<ssl::TaskId>& tasks,
                         const std::vector<const nn::Trunk*>& trunks);

/// Student objective: per-task linear projections of the trunk embedding,
/// normalized and matched to the bank.
class DistillObjective final : public ssl::Objective {
 public:
  DistillObjective(const Experiment& exp, const FeatureBank& bank, std::vector<ssl::TaskId> tasks, DistillMode mode,
                   double tau, int trunk_dim, Rng& rng);

  std::string name() const override { return "distill"; }
  nn::NamedParams parameters() const override;
  ssl::TaskOutput train_loss(const nn::Trunk& trunk, Rng& rng) override;

  /// Loss on the given train samples.
  nn::Var loss(const nn::Trunk& trunk, std::span<const int> samples) const;
  /// Sets every projection to the identity (test fixture).
  void set_identity();

 private:
  const Experiment& exp_;
  const FeatureBank& bank_;
  std::vector<ssl::TaskId> tasks_;
  DistillMode mode_;
  double tau_;
  std::vector<nn::Linear> proj_;
};

StrategyResult distill_train(const Experiment& exp, const std::vector<ssl::TaskId>& tasks, DistillMode mode,
                             double tau);

// Progressive columns -------------------------------------------------------

/// Column k is a fresh trunk initialized like the single-task trunk of task k,
/// receiving laterals from the frozen earlier columns.
std::unique_ptr<Learner> prognet_column_learner(const Experiment& exp,
                                                const std::vector<std::unique_ptr<nn::ConvTrunk>>& previous,
                                                ssl::TaskId task, double lateral_scale);
/// Trained columns of a progressive learner's trunk, cloned.
std::vector<std::unique_ptr<nn::ConvTrunk>> prognet_columns(const Learner& learner);
StrategyResult prognet_train(const Experiment& exp, const std::vector<ssl::TaskId>& tasks,
                             double lateral_scale = 1.0);

// Dispatch ------------------------------------------------------------------

StrategyResult run_strategy(const Experiment& exp, const CombinerConfig& config);

}  // namespace multissl::combine
