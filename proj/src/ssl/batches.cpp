#include "multissl/ssl/batches.hpp"

#include <cmath>
#include <nlohmann/json.hpp>
#include <numeric>

#include "multissl/core/error.hpp"
#include "multissl/scenegen/panorama.hpp"
#include "multissl/signal/stft.hpp"

namespace multissl::ssl {

using nn::Tensor;

void InputSpec::validate() const {
  if (!(segment_seconds > 0.0)) throw ConfigError("input.segment_seconds must be positive");
  if (window < 2 || (window & (window - 1)) != 0) throw ConfigError("input.window must be a power of two");
  if (hop < 1 || hop > window) throw ConfigError("input.hop must be in [1, window]");
}

std::pair<int, int> InputSpec::spectrogram_size(int sample_rate) const {
  return {window / 2 + 1, signal::stft_frame_count(static_cast<size_t>(segment_samples(sample_rate)), window, hop)};
}

int InputSpec::segment_samples(int sample_rate) const {
  return static_cast<int>(std::lround(segment_seconds * sample_rate));
}

int InputSpec::frames_per_segment(double fps) const { return static_cast<int>(std::lround(segment_seconds * fps)); }

int InputSpec::segments(const scenegen::AVSample& s) const {
  return static_cast<int>(std::floor(s.scene.duration / segment_seconds + 1e-9));
}

void to_json(nlohmann::json& j, const InputSpec& s) {
  j = nlohmann::json{{"segment_seconds", s.segment_seconds}, {"window", s.window}, {"hop", s.hop}};
}

void from_json(const nlohmann::json& j, InputSpec& s) {
  j.at("segment_seconds").get_to(s.segment_seconds);
  j.at("window").get_to(s.window);
  j.at("hop").get_to(s.hop);
}

namespace {

Tensor spectrogram_tensor(const signal::Waveform& w, const InputSpec& in) {
  auto spec = signal::stft_spectrogram(w, in.window, in.hop);
  return Tensor({spec.channels, spec.freq_bins, spec.frames}, std::move(spec.values));
}

void check_segment(const scenegen::AVSample& s, int segment, const InputSpec& in) {
  if (segment < 0 || segment >= in.segments(s)) {
    throw Error("segment " + std::to_string(segment) + " out of range for sample " + s.id);
  }
}

}  // namespace

Tensor sound_at(const scenegen::AVSample& s, double t_start, const InputSpec& in) {
  const int sr = s.audio.sample_rate;
  const auto start = static_cast<size_t>(std::lround(t_start * sr));
  return spectrogram_tensor(s.audio.segment(start, static_cast<size_t>(in.segment_samples(sr))), in);
}

Tensor sound_segment(const scenegen::AVSample& s, int segment, const InputSpec& in) {
  check_segment(s, segment, in);
  return sound_at(s, segment * in.segment_seconds, in);
}

scenegen::FrameStack segment_frames(const scenegen::AVSample& s, int segment, const InputSpec& in) {
  check_segment(s, segment, in);
  const double fps = s.frames.count / s.scene.duration;
  const int per = in.frames_per_segment(fps);
  if (per < 1) throw Error("segment shorter than one video frame");
  scenegen::FrameStack out{per, s.frames.height, s.frames.width, {}};
  const size_t plane = static_cast<size_t>(s.frames.height) * s.frames.width;
  const auto first = s.frames.pixels.begin() + static_cast<std::ptrdiff_t>(plane * segment * per);
  out.pixels.assign(first, first + static_cast<std::ptrdiff_t>(plane * per));
  return out;
}

Tensor to_tensor(const scenegen::FrameStack& frames) {
  Tensor t({frames.count, frames.height, frames.width});
  for (size_t i = 0; i < frames.pixels.size(); ++i) t.data[i] = frames.pixels[i];
  return t;
}

Tensor frame_segment(const scenegen::AVSample& s, int segment, const InputSpec& in, int rotation_bin, int bins) {
  auto frames = segment_frames(s, segment, in);
  if (rotation_bin != 0) frames = scenegen::rotate_panorama(frames, rotation_bin, bins);
  return to_tensor(scenegen::mean_frame(frames));
}

Tensor flow_segment(const scenegen::AVSample& s, int segment, const InputSpec& in) {
  return to_tensor(scenegen::mean_frame(scenegen::flow_features(segment_frames(s, segment, in))));
}

Tensor s3r_target(const scenegen::AVSample& s, int segment, const InputSpec& in) {
  check_segment(s, segment, in);
  if (s.s3r_targets.size() != 2) throw Error("sample " + s.id + " has no S3R target channels");
  const int sr = s.audio.sample_rate;
  const auto start = static_cast<size_t>(std::lround(segment * in.segment_seconds * sr));
  const auto len = static_cast<size_t>(in.segment_samples(sr));
  Tensor a = spectrogram_tensor(s.s3r_targets[0].segment(start, len), in);
  Tensor b = spectrogram_tensor(s.s3r_targets[1].segment(start, len), in);
  Tensor out({4, a.dim(1), a.dim(2)});
  std::copy(a.data.begin(), a.data.end(), out.data.begin());
  std::copy(b.data.begin(), b.data.end(), out.data.begin() + a.size());
  return out;
}

std::vector<int> segment_labels(const scenegen::AVSample& s, int segment, const InputSpec& in, int num_classes) {
  check_segment(s, segment, in);
  const double fps = s.frames.count / s.scene.duration;
  const int per = in.frames_per_segment(fps);
  const size_t bins = static_cast<size_t>(s.semantic_bins);
  std::vector<int> out(static_cast<size_t>(per) * bins);
  for (size_t i = 0; i < out.size(); ++i) {
    const uint8_t v = s.labels[static_cast<size_t>(segment * per) * bins + i];
    out[i] = v == scenegen::kBackgroundLabel ? num_classes : v;
  }
  return out;
}

Tensor stack(std::span<const Tensor> items) {
  if (items.empty()) throw Error("stack: no items");
  nn::Shape shape = items.front().shape;
  shape.insert(shape.begin(), static_cast<int>(items.size()));
  Tensor out(shape);
  const auto each = items.front().size();
  for (size_t i = 0; i < items.size(); ++i) {
    if (items[i].shape != items.front().shape) throw Error("stack: shapes differ");
    std::copy(items[i].data.begin(), items[i].data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(i * each));
  }
  return out;
}

std::vector<int> draw_distinct(int count, int n, Rng& rng) {
  if (n > count) {
    throw Error("batch of " + std::to_string(n) + " needs at least that many samples, have " + std::to_string(count));
  }
  std::vector<int> idx(static_cast<size_t>(count));
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = 0; i < n; ++i) {
    const int j = i + rng.uniform_int(count - i);
    std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(j)]);
  }
  idx.resize(static_cast<size_t>(n));
  return idx;
}

}  // namespace multissl::ssl
