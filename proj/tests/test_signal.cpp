#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <numbers>

#include "fixtures.hpp"
#include "multissl/core/error.hpp"
#include "multissl/core/rng.hpp"
#include "multissl/signal/binaural.hpp"
#include "multissl/signal/slicing.hpp"
#include "multissl/signal/stft.hpp"
#include "multissl/signal/wav.hpp"

using namespace multissl;
using namespace multissl::signal;

namespace {

Waveform tone(int sr, size_t n, double hz, double amp = 0.5) {
  Waveform w = Waveform::silence(sr, n);
  for (size_t i = 0; i < n; ++i) {
    const double v = amp * std::sin(2.0 * std::numbers::pi * hz * static_cast<double>(i) / sr);
    w.channels[0][i] = v;
    w.channels[1][i] = 0.5 * v;
  }
  return w;
}

// Direct O(n^2) DFT of one Hann-windowed frame.
double dft_magnitude(const std::vector<double>& x, size_t offset, int window, int bin) {
  std::complex<double> acc = 0.0;
  for (int n = 0; n < window; ++n) {
    const double hann = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / window);
    const double ang = -2.0 * std::numbers::pi * bin * n / window;
    acc += x[offset + static_cast<size_t>(n)] * hann * std::complex<double>(std::cos(ang), std::sin(ang));
  }
  return std::abs(acc);
}

std::vector<double> noise(size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (auto& x : v) x = 0.3 * rng.normal();
  return v;
}

}  // namespace

TEST(Stft, MatchesDirectDftOnEveryBin) {
  Rng rng(3);
  Waveform w = Waveform::silence(8000, 1024);
  w.channels[0] = noise(1024, rng);
  w.channels[1] = noise(1024, rng);
  const auto s = stft_magnitude(w, 128, 64);
  ASSERT_EQ(s.frames, stft_frame_count(1024, 128, 64));
  for (int c = 0; c < 2; ++c) {
    for (int t : {0, 5, s.frames - 1}) {
      for (int f = 0; f < s.freq_bins; ++f) {
        EXPECT_NEAR(s.at(c, f, t), dft_magnitude(w.channels[static_cast<size_t>(c)], static_cast<size_t>(t) * 64, 128, f),
                    1e-9);
      }
    }
  }
}

TEST(Stft, BinCenteredTonePeaksAtItsBin) {
  // 875 Hz at 8 kHz with a 128-point window lands exactly on bin 14.
  const auto s = stft_magnitude(tone(8000, 2048, 875.0), 128, 32);
  for (int t = 0; t < s.frames; ++t) {
    int best = 0;
    for (int f = 1; f < s.freq_bins; ++f) {
      if (s.at(0, f, t) > s.at(0, best, t)) best = f;
    }
    EXPECT_EQ(best, 14);
    // Hann main lobe: A * N / 4 at the centre bin.
    EXPECT_NEAR(s.at(0, 14, t), 0.5 * 128 / 4, 1e-9);
  }
}

TEST(Stft, SilenceIsZeroAndLogIsLog1p) {
  const auto s = stft_spectrogram(Waveform::silence(8000, 512), 128, 64);
  for (double v : s.values) EXPECT_EQ(v, 0.0);
  const auto w = tone(8000, 512, 440.0);
  const auto mag = stft_magnitude(w, 128, 64);
  const auto lg = stft_spectrogram(w, 128, 64);
  for (size_t i = 0; i < mag.values.size(); ++i) EXPECT_DOUBLE_EQ(lg.values[i], std::log1p(mag.values[i]));
}

TEST(Stft, ShapesFollowWindowAndHop) {
  const auto s = stft_magnitude(Waveform::silence(16000, 32000), 512, 256);
  EXPECT_EQ(s.channels, 2);
  EXPECT_EQ(s.freq_bins, 257);
  EXPECT_EQ(s.frames, 1 + (32000 - 512) / 256);
}

TEST(Stft, RejectsMonoInput) {
  Waveform w;
  w.sample_rate = 8000;
  w.channels = {std::vector<double>(512, 0.0)};
  try {
    stft_magnitude(w, 128, 64);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("binaural required"), std::string::npos);
  }
}

TEST(Stft, RejectsBadWindowAndShortInput) {
  EXPECT_THROW(stft_magnitude(Waveform::silence(8000, 512), 100, 50), Error);
  EXPECT_THROW(stft_magnitude(Waveform::silence(8000, 512), 128, 0), Error);
  EXPECT_THROW(stft_magnitude(Waveform::silence(8000, 64), 128, 64), Error);
}

TEST(Waveform, ValidateRejectsNonFinite) {
  Waveform w = Waveform::silence(8000, 16);
  w.channels[1][3] = std::nan("");
  EXPECT_THROW(w.validate(), Error);
}

TEST(Slicing, GapIsNormalizedAndInRange) {
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const auto p = slice_pair(10.0, 2.0, rng);
    EXPECT_GE(p.delta, 0.0);
    EXPECT_LE(p.delta, 1.0);
    EXPECT_GE(p.first.t_start, 0.0);
    EXPECT_GE(p.second.t_start, 0.0);
    EXPECT_LE(p.first.t_start + 2.0, 10.0 + 1e-12);
    EXPECT_LE(p.second.t_start + 2.0, 10.0 + 1e-12);
    EXPECT_NEAR(p.delta, normalized_gap(p.first.t_start, p.second.t_start, 10.0, 2.0), 1e-12);
  }
}

TEST(Slicing, GapIsUniform) {
  // Kolmogorov-Smirnov statistic of 10^4 gaps against U(0, 1).
  Rng rng(8);
  std::vector<double> d;
  for (int i = 0; i < 10000; ++i) d.push_back(slice_pair(4.0, 1.0, rng).delta);
  std::sort(d.begin(), d.end());
  double ks = 0.0;
  for (size_t i = 0; i < d.size(); ++i) {
    ks = std::max({ks, std::abs(d[i] - static_cast<double>(i) / d.size()),
                   std::abs(d[i] - static_cast<double>(i + 1) / d.size())});
  }
  EXPECT_LT(ks, 1.63 / std::sqrt(10000.0));  // 1% level
}

TEST(Slicing, RejectsClipNoLongerThanSlice) {
  Rng rng(1);
  EXPECT_THROW(slice_pair(2.0, 2.0, rng), Error);
  EXPECT_THROW(slice_pair(2.0, 0.0, rng), Error);
}

TEST(Binaural, ConstantPowerAndCentre) {
  for (double az = -180.0; az < 180.0; az += 7.5) {
    const auto g = pan_gains(az);
    EXPECT_NEAR(g.left * g.left + g.right * g.right, 1.0, 1e-12);
  }
  const auto c = pan_gains(0.0);
  EXPECT_NEAR(c.left, std::sqrt(0.5), 1e-15);
  EXPECT_NEAR(c.right, std::sqrt(0.5), 1e-15);
  EXPECT_NEAR(pan_gains(90.0).left, 0.0, 1e-12);
  EXPECT_NEAR(pan_gains(90.0).right, 1.0, 1e-12);
  EXPECT_NEAR(pan_gains(-90.0).left, 1.0, 1e-12);
}

TEST(Binaural, ItdMatchesHeadModel) {
  EXPECT_EQ(itd_samples(0.0, 16000), 0);
  EXPECT_EQ(itd_samples(90.0, 16000), std::lround(0.18 / 343.0 * 16000));
  EXPECT_EQ(itd_samples(-90.0, 16000), itd_samples(90.0, 16000));
  EXPECT_EQ(itd_samples(30.0, 44100), std::lround(0.18 / 343.0 * 0.5 * 44100));
}

TEST(Binaural, WrapDegrees) {
  EXPECT_EQ(wrap_degrees(180.0), -180.0);
  EXPECT_EQ(wrap_degrees(-180.0), -180.0);
  EXPECT_EQ(wrap_degrees(540.0), -180.0);
  EXPECT_NEAR(wrap_degrees(-190.0), 170.0, 1e-12);
  EXPECT_NEAR(wrap_degrees(725.0), 5.0, 1e-12);
  for (double d = -180.0; d < 180.0; d += 0.5) EXPECT_EQ(wrap_degrees(d), d);
}

TEST(Binaural, RightSourceLeadsOnTheRight) {
  Rng rng(2);
  MonoSource src{60.0, noise(400, rng)};
  const auto w = render_binaural({src}, 16000, 0.0);
  const int delay = itd_samples(60.0, 16000);
  ASSERT_GT(delay, 0);
  const auto g = pan_gains(60.0);
  for (size_t n = 0; n < 400; ++n) {
    EXPECT_NEAR(w.channels[1][n], std::clamp(g.right * src.samples[n], -1.0, 1.0), 1e-15);
    const double left = n >= static_cast<size_t>(delay) ? g.left * src.samples[n - static_cast<size_t>(delay)] : 0.0;
    EXPECT_NEAR(w.channels[0][n], std::clamp(left, -1.0, 1.0), 1e-15);
  }
}

TEST(Binaural, RotationEquivariance) {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const double az = rng.uniform(-180.0, 180.0);
    const double rot = rng.uniform(-180.0, 180.0);
    const auto samples = noise(300, rng);
    const auto rotated = render_binaural({{az, samples}}, 8000, rot);
    const auto shifted = render_binaural({{relative_azimuth(az, rot), samples}}, 8000, 0.0);
    EXPECT_EQ(rotated.channels, shifted.channels);
  }
}

TEST(Binaural, FullTurnIsIdentity) {
  Rng rng(5);
  const std::vector<MonoSource> sources{{-40.0, noise(256, rng)}, {100.0, noise(256, rng)}};
  EXPECT_EQ(render_binaural(sources, 8000, 0.0).channels, render_binaural(sources, 8000, 360.0).channels);
}

TEST(Binaural, MixIsClipped) {
  MonoSource loud{0.0, std::vector<double>(64, 3.0)};
  const auto w = render_binaural({loud}, 8000, 0.0);
  for (const auto& ch : w.channels) {
    for (double v : ch) EXPECT_LE(std::abs(v), 1.0);
  }
}

TEST(Wav, QuantizedRoundTripIsExact) {
  testkit::TempDir dir("wav");
  Rng rng(6);
  Waveform w = Waveform::silence(8000, 777);
  w.channels[0] = noise(777, rng);
  w.channels[1] = noise(777, rng);
  for (auto& ch : w.channels) {
    for (auto& v : ch) v = std::clamp(v, -1.0, 1.0);
  }
  quantize_pcm16(w);
  write_wav(dir.path() / "a.wav", w);
  const auto back = read_wav(dir.path() / "a.wav");
  EXPECT_EQ(back.sample_rate, 8000);
  EXPECT_EQ(back.channels, w.channels);
}

TEST(Wav, RejectsGarbage) {
  testkit::TempDir dir("wav");
  std::ofstream(dir.path() / "x.wav") << "definitely not a wav";
  EXPECT_THROW(read_wav(dir.path() / "x.wav"), Error);
}
