#pragma once

#include <vector>

#include "multissl/signal/waveform.hpp"

namespace multissl::signal {

inline constexpr double kHeadSpacingMeters = 0.18;
inline constexpr double kSpeedOfSound = 343.0;

struct MonoSource {
  double azimuth_deg = 0.0;  ///< in [-180, 180)
  std::vector<double> samples;
};

struct PanGains {
  double left = 0.0;
  double right = 0.0;
};

/// Maps any angle to [-180, 180). Idempotent and exact on that range.
double wrap_degrees(double deg);

/// Azimuth relative to a rotated microphone: wrap(wrap(theta) - wrap(rotation)).
double relative_azimuth(double azimuth_deg, double mic_rotation_deg);

/// Constant-power panning: left = sqrt((1 - sin t) / 2), right = sqrt((1 + sin t) / 2).
PanGains pan_gains(double relative_azimuth_deg);

/// Whole-sample interaural delay round(d / c * |sin t| * sample_rate).
int itd_samples(double relative_azimuth_deg, int sample_rate);

/// Static-source binaural renderer. Each source is panned, the far ear is
/// delayed by the ITD, sources sum linearly and the mix is clipped to [-1, 1].
Waveform render_binaural(const std::vector<MonoSource>& sources, int sample_rate,
                         double mic_rotation_deg);

}  // namespace multissl::signal
