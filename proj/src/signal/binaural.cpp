#include "multissl/signal/binaural.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "multissl/core/error.hpp"

namespace multissl::signal {

double wrap_degrees(double deg) {
  if (deg >= -180.0 && deg < 180.0) return deg;
  double w = deg - 360.0 * std::floor((deg + 180.0) / 360.0);
  if (w >= 180.0) w -= 360.0;
  return w;
}

double relative_azimuth(double azimuth_deg, double mic_rotation_deg) {
  return wrap_degrees(wrap_degrees(azimuth_deg) - wrap_degrees(mic_rotation_deg));
}

PanGains pan_gains(double relative_azimuth_deg) {
  const double s = std::sin(relative_azimuth_deg * std::numbers::pi / 180.0);
  return {std::sqrt(std::max(0.0, (1.0 - s) / 2.0)), std::sqrt(std::max(0.0, (1.0 + s) / 2.0))};
}

int itd_samples(double relative_azimuth_deg, int sample_rate) {
  const double s = std::sin(relative_azimuth_deg * std::numbers::pi / 180.0);
  return static_cast<int>(std::lround(kHeadSpacingMeters / kSpeedOfSound * std::abs(s) * sample_rate));
}

Waveform render_binaural(const std::vector<MonoSource>& sources, int sample_rate,
                         double mic_rotation_deg) {
  if (sources.empty()) throw Error("render_binaural: no sources");
  const size_t length = sources.front().samples.size();
  for (const auto& src : sources) {
    if (src.samples.size() != length) throw Error("render_binaural: sources differ in length");
    if (!(src.azimuth_deg >= -180.0 && src.azimuth_deg < 180.0)) {
      throw Error("render_binaural: azimuth outside [-180, 180)");
    }
  }
  Waveform out = Waveform::silence(sample_rate, length);
  for (const auto& src : sources) {
    const double rel = relative_azimuth(src.azimuth_deg, mic_rotation_deg);
    const PanGains g = pan_gains(rel);
    const size_t delay = static_cast<size_t>(itd_samples(rel, sample_rate));
    // Positive relative azimuth is on the right, so the left ear is far.
    const bool left_far = std::sin(rel * std::numbers::pi / 180.0) > 0.0;
    const size_t dl = left_far ? delay : 0;
    const size_t dr = left_far ? 0 : delay;
    for (size_t n = 0; n < length; ++n) {
      if (n >= dl) out.channels[0][n] += g.left * src.samples[n - dl];
      if (n >= dr) out.channels[1][n] += g.right * src.samples[n - dr];
    }
  }
  for (auto& ch : out.channels) {
    for (auto& v : ch) v = std::clamp(v, -1.0, 1.0);
  }
  return out;
}

}  // namespace multissl::signal
