#pragma once

#include <cstddef>
#include <vector>

namespace multissl::signal {

/// Binaural recording: exactly two channels (left, right) of equal length with
/// amplitudes in [-1, 1].
struct Waveform {
  int sample_rate = 16000;
  std::vector<std::vector<double>> channels;

  size_t length() const { return channels.empty() ? 0 : channels[0].size(); }
  double duration() const { return static_cast<double>(length()) / sample_rate; }

  /// Throws unless the invariants hold ("binaural required" for a wrong
  /// channel count).
  void validate() const;

  /// Copy of samples [start, start + count).
  Waveform segment(size_t start, size_t count) const;

  static Waveform silence(int sample_rate, size_t length);
};

}  // namespace multissl::signal
