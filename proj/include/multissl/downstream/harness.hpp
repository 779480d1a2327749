#pragma once

#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "multissl/core/metrics.hpp"
#include "multissl/downstream/metrics.hpp"
#include "multissl/nn/encoder.hpp"
#include "multissl/scenegen/dataset.hpp"
#include "multissl/ssl/batches.hpp"
#include "multissl/ssl/tasks.hpp"

namespace multissl::downstream {

enum class Harness { kRetrieval, kSemantic, kS3r, kProbe };
inline constexpr Harness kAllHarnesses[] = {Harness::kRetrieval, Harness::kSemantic, Harness::kS3r,
                                            Harness::kProbe};
/// "retrieval", "semantic", "s3r", "probe"
const char* harness_name(Harness h);
Harness parse_harness(const std::string& s);

struct DownstreamConfig {
  std::vector<Harness> harnesses{kAllHarnesses, kAllHarnesses + 4};
  /// Decoder training budget of the semantic and s3r harnesses.
  int steps = 300;
  double lr = 1e-3;
  int batch_size = 16;
  /// Train the trunk together with the decoder; otherwise the trunk is frozen.
  bool finetune = true;
  int decoder_hidden = 64;
  double ridge_alpha = 1.0;
  ProbeConfig probe;

  void validate() const;
};

void to_json(nlohmann::json& j, const DownstreamConfig& c);
void from_json(const nlohmann::json& j, DownstreamConfig& c);

struct EvalEnv {
  const scenegen::Dataset* data = nullptr;
  ssl::InputSpec input;
  DownstreamConfig config;
  uint64_t seed = 0;
  MetricSink sink;
};

struct HarnessResult {
  ssl::Metrics metrics;
  /// The trunk as it stands after the harness (a trained clone for the decoder
  /// harnesses, an untouched clone otherwise). The input trunk is never modified.
  std::unique_ptr<nn::Trunk> trunk;
};

/// Ridge map from one modality's segment embedding to the other's, fitted on
/// the train split; top-1 retrieval over the test split. With a sound trunk
/// the queries are its pooled embeddings and the gallery holds video
/// descriptors; with a visual trunk a fixed audio descriptor queries the
/// trunk's pooled frame embeddings.
HarnessResult retrieval_eval(const nn::Trunk& trunk, const EvalEnv& env);
/// Per-azimuth-bin class prediction from the sound trunk's dense map; mIoU on
/// the test split.
HarnessResult semantic_eval(const nn::Trunk& trunk, const EvalEnv& env);
/// Spectrograms of the two unobserved orientations from the sound trunk's
/// dense map; MSE on the test split.
HarnessResult s3r_eval(const nn::Trunk& trunk, const EvalEnv& env);
/// Logistic regression on frozen pooled embeddings, scene class as label.
HarnessResult probe_eval(const nn::Trunk& trunk, const EvalEnv& env);

HarnessResult run_harness(Harness h, const nn::Trunk& trunk, const EvalEnv& env);

/// Video descriptor of a segment: per-frame column profiles over 32 azimuth
/// bins, concatenated, mean-removed and L2-normalized.
std::vector<double> video_descriptor(const scenegen::AVSample& s, int segment, const ssl::InputSpec& in);
/// Audio descriptor of a segment: time-averaged log spectrogram of both
/// channels, mean-removed and L2-normalized.
std::vector<double> audio_descriptor(const scenegen::AVSample& s, int segment, const ssl::InputSpec& in);

/// Decoder heads applied to a dense map [N, d, F', T'].
/// Semantic: logits [N * frames * bins, classes + 1], rows ordered by sample,
/// frame, bin.
nn::Var semantic_logits(const nn::Head& decoder, const nn::Var& dense, int frames, int bins, int classes);
/// S3R: [N, 4, F, T].
nn::Var s3r_prediction(const nn::Head& decoder, const nn::Var& dense, int height, int width);

struct Provenance {
  std::string strategy;
  std::vector<std::string> tasks;
  uint64_t seed = 0;
  int64_t step = 0;
  std::string checkpoint_hash;
};

struct EvalReport {
  std::string harness;
  std::string metric;
  double value = 0.0;
  Provenance provenance;
  double wall_seconds = 0.0;
};

void to_json(nlohmann::json& j, const Provenance& p);
void to_json(nlohmann::json& j, const EvalReport& r);
void from_json(const nlohmann::json& j, Provenance& p);
void from_json(const nlohmann::json& j, EvalReport& r);

}  // namespace multissl::downstream
