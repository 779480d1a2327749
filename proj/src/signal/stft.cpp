#include "multissl/signal/stft.hpp"

#include <cmath>
#include <numbers>

#include "multissl/core/error.hpp"

namespace multissl::signal {

void Waveform::validate() const {
  if (channels.size() != 2) throw Error("binaural required: got " + std::to_string(channels.size()) + " channels");
  if (channels[0].size() != channels[1].size()) throw Error("binaural channels differ in length");
  if (channels[0].empty()) throw Error("waveform is empty");
  if (sample_rate <= 0) throw Error("sample rate must be positive");
  for (const auto& ch : channels) {
    for (double v : ch) {
      if (!std::isfinite(v)) throw Error("waveform contains non-finite samples");
    }
  }
}

Waveform Waveform::segment(size_t start, size_t count) const {
  if (start + count > length()) throw Error("segment exceeds waveform length");
  Waveform out;
  out.sample_rate = sample_rate;
  for (const auto& ch : channels) {
    out.channels.emplace_back(ch.begin() + static_cast<std::ptrdiff_t>(start),
                              ch.begin() + static_cast<std::ptrdiff_t>(start + count));
  }
  return out;
}

Waveform Waveform::silence(int sample_rate, size_t length) {
  Waveform w;
  w.sample_rate = sample_rate;
  w.channels.assign(2, std::vector<double>(length, 0.0));
  return w;
}

int stft_frame_count(size_t length, int window, int hop) {
  if (length < static_cast<size_t>(window)) return 0;
  return 1 + static_cast<int>((length - static_cast<size_t>(window)) / static_cast<size_t>(hop));
}

void fft_inplace(std::vector<std::complex<double>>& a) {
  const size_t n = a.size();
  if (n == 0 || (n & (n - 1)) != 0) throw Error("fft size must be a power of two");
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
    for (size_t i = 0; i < n; i += len) {
      for (size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> w(std::cos(ang * static_cast<double>(k)),
                                     std::sin(ang * static_cast<double>(k)));
        const auto u = a[i + k];
        const auto v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
      }
    }
  }
}

Spectrogram stft_magnitude(const Waveform& w, int window, int hop) {
  if (w.channels.size() != 2) throw Error("binaural required: got " + std::to_string(w.channels.size()) + " channels");
  if (window <= 0 || (window & (window - 1)) != 0) throw Error("window must be a power of two");
  if (hop <= 0 || hop > window) throw Error("hop must be in [1, window]");
  if (w.length() < static_cast<size_t>(window)) throw Error("waveform too short for one window");

  Spectrogram s;
  s.channels = 2;
  s.freq_bins = window / 2 + 1;
  s.frames = stft_frame_count(w.length(), window, hop);
  s.window = window;
  s.hop = hop;
  s.sample_rate = w.sample_rate;
  s.values.assign(static_cast<size_t>(s.channels) * s.freq_bins * s.frames, 0.0);

  std::vector<double> hann(static_cast<size_t>(window));
  for (int n = 0; n < window; ++n) {
    hann[static_cast<size_t>(n)] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / window);
  }
  std::vector<std::complex<double>> buf(static_cast<size_t>(window));
  for (int c = 0; c < 2; ++c) {
    const auto& x = w.channels[static_cast<size_t>(c)];
    for (int t = 0; t < s.frames; ++t) {
      const size_t off = static_cast<size_t>(t) * hop;
      for (int n = 0; n < window; ++n) buf[static_cast<size_t>(n)] = x[off + n] * hann[static_cast<size_t>(n)];
      fft_inplace(buf);
      for (int f = 0; f < s.freq_bins; ++f) s.at(c, f, t) = std::abs(buf[static_cast<size_t>(f)]);
    }
  }
  return s;
}

Spectrogram stft_spectrogram(const Waveform& w, int window, int hop) {
  Spectrogram s = stft_magnitude(w, window, hop);
  for (auto& v : s.values) v = std::log1p(v);
  return s;
}

}  // namespace multissl::signal
