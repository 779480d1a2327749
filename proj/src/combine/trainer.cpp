#include "multissl/combine/trainer.hpp"

#include <cmath>
#include <nlohmann/json.hpp>

#include "multissl/core/error.hpp"

namespace multissl::combine {

using namespace nn;

void TrainConfig::validate() const {
  if (steps < 0) throw ConfigError("train.steps must be >= 0");
  if (!(lr > 0.0)) throw ConfigError("train.lr must be positive");
  if (log_every < 1) throw ConfigError("train.log_every must be >= 1");
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"steps", c.steps}, {"lr", c.lr}, {"log_every", c.log_every}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  j.at("steps").get_to(c.steps);
  j.at("lr").get_to(c.lr);
  j.at("log_every").get_to(c.log_every);
}

Learner::Learner(std::unique_ptr<Trunk> trunk, AdamConfig adam) : trunk_(std::move(trunk)), adam_(adam) {
  if (!trunk_) throw Error("learner needs a trunk");
}

void Learner::add(std::unique_ptr<ssl::Objective> objective, double weight, Rng batch_rng) {
  if (!(weight >= 0.0) || !std::isfinite(weight)) throw ConfigError("objective weights must be finite and >= 0");
  slots_.push_back({std::move(objective), weight, batch_rng, true});
}

NamedParams Learner::parameters() const {
  NamedParams p;
  append_params(p, "trunk.", trunk_->parameters());
  for (const auto& s : slots_) append_params(p, s.objective->name() + ".", s.objective->parameters());
  return p;
}

Var Learner::total_loss(StepResult& result, const ExtraLoss& extra) {
  if (slots_.empty()) throw Error("learner has no objectives");
  Var total;
  for (auto& s : slots_) {
    if (!s.active) {
      result.outputs.emplace_back();
      continue;
    }
    result.outputs.push_back(s.objective->train_loss(*trunk_, s.rng));
    Var term = scale(result.outputs.back().loss, s.weight);
    total = total.defined() ? nn::add(total, term) : term;
  }
  if (extra) {
    result.extra = extra(result.outputs);
    total = nn::add(total, result.extra);
  }
  if (!total.defined()) throw Error("learner has no active objectives");
  result.total = total.item();
  return total;
}

Learner::StepResult Learner::step(const ExtraLoss& extra) {
  const NamedParams params = parameters();
  zero_grads(params);
  StepResult result;
  Var total = total_loss(result, extra);
  if (!std::isfinite(result.total)) throw Error("training diverged: non-finite loss at step " + std::to_string(steps_ + 1));
  backward(total);
  adam_.step(params);
  zero_grads(params);
  for (auto& s : slots_) s.objective->after_update(*trunk_);
  ++steps_;
  return result;
}

void Learner::train(const TrainConfig& config, const std::string& phase, const MetricSink& sink,
                    const ExtraLoss& extra) {
  config.validate();
  for (int i = 1; i <= config.steps; ++i) {
    StepResult r = step(extra);
    if (!sink || (i % config.log_every != 0 && i != config.steps)) continue;
    for (size_t k = 0; k < slots_.size(); ++k) {
      if (!r.outputs[k].loss.defined()) continue;
      const std::string name = slots_[k].objective->name();
      sink({phase, name, steps_, "loss", r.outputs[k].loss.item()});
      for (const auto& [metric, value] : r.outputs[k].metrics) sink({phase, name, steps_, metric, value});
    }
    if (r.extra.defined()) sink({phase, "combined", steps_, "extra_loss", r.extra.item()});
    if (slots_.size() > 1 || r.extra.defined()) sink({phase, "combined", steps_, "total_loss", r.total});
  }
}

std::unique_ptr<ConvTrunk> init_trunk(const EncoderConfig& config, uint64_t seed, const std::string& label) {
  Rng rng = Rng(seed).derive("trunk/" + label);
  return std::make_unique<ConvTrunk>(config, rng);
}

Rng head_stream(uint64_t seed, const std::string& label) { return Rng(seed).derive("head/" + label); }
Rng batch_stream(uint64_t seed, const std::string& label) { return Rng(seed).derive("batch/" + label); }

}  // namespace multissl::combine
