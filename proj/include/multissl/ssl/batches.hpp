#pragma once

#include <nlohmann/json_fwd.hpp>
#include <span>
#include <utility>
#include <vector>

#include "multissl/nn/tensor.hpp"
#include "multissl/scenegen/scene.hpp"

namespace multissl::ssl {

/// How clips are cut into encoder inputs.
struct InputSpec {
  double segment_seconds = 2.0;
  int window = 512;
  int hop = 256;

  void validate() const;
  /// (F, T) of a segment spectrogram at this sample rate.
  std::pair<int, int> spectrogram_size(int sample_rate) const;
  int segment_samples(int sample_rate) const;
  int frames_per_segment(double fps) const;
  int segments(const scenegen::AVSample& s) const;
};

void to_json(nlohmann::json& j, const InputSpec& s);
void from_json(const nlohmann::json& j, InputSpec& s);

/// [2, F, T] log spectrogram of the segment starting at t_start seconds.
nn::Tensor sound_at(const scenegen::AVSample& s, double t_start, const InputSpec& in);
nn::Tensor sound_segment(const scenegen::AVSample& s, int segment, const InputSpec& in);
/// Frames of one segment, optionally rotated.
scenegen::FrameStack segment_frames(const scenegen::AVSample& s, int segment, const InputSpec& in);
/// [1, H, W] mean frame of a segment after rotating by rotation_bin of bins.
nn::Tensor frame_segment(const scenegen::AVSample& s, int segment, const InputSpec& in, int rotation_bin = 0,
                         int bins = 8);
/// [1, H, W] mean absolute frame difference over a segment.
nn::Tensor flow_segment(const scenegen::AVSample& s, int segment, const InputSpec& in);
/// [4, F, T] log spectrograms of the +90 and -90 degree renders.
nn::Tensor s3r_target(const scenegen::AVSample& s, int segment, const InputSpec& in);
/// Segment labels [frames_per_segment * bins], background mapped to num_classes.
std::vector<int> segment_labels(const scenegen::AVSample& s, int segment, const InputSpec& in, int num_classes);

nn::Tensor to_tensor(const scenegen::FrameStack& frames);
/// Stacks equally shaped tensors along a new leading axis.
nn::Tensor stack(std::span<const nn::Tensor> items);

/// n distinct indices from [0, count).
std::vector<int> draw_distinct(int count, int n, Rng& rng);

}  // namespace multissl::ssl
