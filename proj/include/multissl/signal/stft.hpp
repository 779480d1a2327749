#pragma once

#include <complex>
#include <vector>

#include "multissl/signal/waveform.hpp"

namespace multissl::signal {

/// C x F x T time-frequency grid, row-major.
struct Spectrogram {
  int channels = 0;
  int freq_bins = 0;
  int frames = 0;
  int window = 0;
  int hop = 0;
  int sample_rate = 0;
  std::vector<double> values;

  double at(int c, int f, int t) const {
    return values[(static_cast<size_t>(c) * freq_bins + f) * frames + t];
  }
  double& at(int c, int f, int t) {
    return values[(static_cast<size_t>(c) * freq_bins + f) * frames + t];
  }
};

/// Frame count for a signal of `length` samples: 1 + floor((L - window) / hop).
int stft_frame_count(size_t length, int window, int hop);

/// In-place iterative radix-2 FFT. Size must be a power of two.
void fft_inplace(std::vector<std::complex<double>>& data);

/// Per-channel Hann-windowed STFT magnitude, no compression.
Spectrogram stft_magnitude(const Waveform& w, int window, int hop);

/// Magnitude STFT followed by log(1 + x). This is the input representation of
/// every sound encoder.
Spectrogram stft_spectrogram(const Waveform& w, int window, int hop);

}  // namespace multissl::signal
