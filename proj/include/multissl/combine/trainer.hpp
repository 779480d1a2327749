#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "multissl/core/metrics.hpp"
#include "multissl/nn/model_state.hpp"
#include "multissl/ssl/tasks.hpp"

namespace multissl::combine {

struct TrainConfig {
  int steps = 2000;
  double lr = 1e-3;
  int log_every = 50;

  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

/// A trunk and a set of weighted objectives optimized jointly by one Adam
/// instance. Each objective draws its batches from its own stream.
class Learner {
 public:
  Learner(std::unique_ptr<nn::Trunk> trunk, nn::AdamConfig adam);

  void add(std::unique_ptr<ssl::Objective> objective, double weight, Rng batch_rng);
  /// Inactive objectives draw no batches; their parameters still train when
  /// an extra loss term reaches them.
  void set_active(size_t k, bool active) { slots_.at(k).active = active; }

  nn::Trunk& trunk() const { return *trunk_; }
  std::unique_ptr<nn::Trunk> release_trunk() { return std::move(trunk_); }
  size_t size() const { return slots_.size(); }
  ssl::Objective& objective(size_t k) const { return *slots_.at(k).objective; }
  double weight(size_t k) const { return slots_.at(k).weight; }

  /// "trunk.*" followed by "<objective>.*" for each objective.
  nn::NamedParams parameters() const;

  /// Extra loss term built from this step's objective outputs.
  using ExtraLoss = std::function<nn::Var(const std::vector<ssl::TaskOutput>&)>;

  struct StepResult {
    std::vector<ssl::TaskOutput> outputs;
    nn::Var extra;
    double total = 0.0;
  };

  /// Draws every active objective's batch (inactive ones get an empty
  /// output) and returns sum_k w_k L_k (+ extra)
  /// without updating anything.
  nn::Var total_loss(StepResult& result, const ExtraLoss& extra = nullptr);
  /// One optimizer step on the total loss.
  StepResult step(const ExtraLoss& extra = nullptr);
  /// config.steps steps, logging every log_every and at the last step.
  void train(const TrainConfig& config, const std::string& phase, const MetricSink& sink,
             const ExtraLoss& extra = nullptr);

  nn::Adam& optimizer() { return adam_; }
  int64_t steps() const { return steps_; }
  nn::ModelState state() const { return nn::capture(parameters(), &adam_, steps_); }

 private:
  struct Slot {
    std::unique_ptr<ssl::Objective> objective;
    double weight;
    Rng rng;
    bool active = true;
  };
  std::unique_ptr<nn::Trunk> trunk_;
  std::vector<Slot> slots_;
  nn::Adam adam_;
  int64_t steps_ = 0;
};

/// Fresh trunk for a modality, initialized from Rng(seed).derive("trunk/<label>").
std::unique_ptr<nn::ConvTrunk> init_trunk(const nn::EncoderConfig& config, uint64_t seed, const std::string& label);
Rng head_stream(uint64_t seed, const std::string& label);
Rng batch_stream(uint64_t seed, const std::string& label);

}  // namespace multissl::combine
