#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "multissl/core/rng.hpp"
#include "multissl/signal/waveform.hpp"

namespace multissl::scenegen {

inline constexpr uint8_t kBackgroundLabel = 255;

/// Generator parameters. Everything that influences the produced bytes lives
/// here so that its hash identifies a dataset version.
struct SceneGenConfig {
  int num_classes = 5;
  std::vector<double> class_fundamentals{220.0, 294.0, 392.0, 523.0, 660.0};
  int sample_rate = 16000;
  double duration = 10.0;
  double fps = 4.0;
  int height = 64;
  int width = 256;
  int semantic_bins = 32;
  int min_sources = 1;
  int max_sources = 2;
  /// Sources start uniformly in [-span/2, span/2).
  double azimuth_span = 360.0;
  double min_speed = 5.0;   ///< deg/s, sign drawn at random
  double max_speed = 30.0;
  /// Per-source loudness ramps linearly from gain_start to gain_end over the
  /// clip, as for an approaching vehicle.
  double gain_start = 0.3;
  double gain_end = 1.0;
  double source_amplitude = 0.3;
  double noise_level = 0.0;
  bool s3r_targets = true;
  int train = 512;
  int val = 128;
  int test = 128;

  void validate() const;
  int frame_count() const;
};

void to_json(nlohmann::json& j, const SceneGenConfig& c);
void from_json(const nlohmann::json& j, SceneGenConfig& c);
std::string config_hash(const SceneGenConfig& c);

struct SourceSpec {
  int class_id = 0;
  double azimuth_start = 0.0;     ///< degrees
  double angular_velocity = 0.0;  ///< degrees per second
  double fundamental_hz = 220.0;
  uint64_t timbre_seed = 0;

  double azimuth_at(double t) const;
};

struct SceneSpec {
  std::vector<SourceSpec> sources;
  double duration = 10.0;
  uint64_t seed = 0;

  /// 1..4 sources, class ids in range, starting azimuths at least 20 degrees
  /// apart on the circle.
  void validate(int num_classes) const;
};

void to_json(nlohmann::json& j, const SceneSpec& s);
void from_json(const nlohmann::json& j, SceneSpec& s);

/// Grayscale equirectangular frames, [count, height, width] row-major.
struct FrameStack {
  int count = 0;
  int height = 0;
  int width = 0;
  std::vector<float> pixels;

  float at(int f, int y, int x) const {
    return pixels[(static_cast<size_t>(f) * height + y) * width + x];
  }
  /// One frame as its own stack.
  FrameStack frame(int f) const;
};

/// One generated scene with all of its derived views.
struct AVSample {
  std::string id;
  SceneSpec scene;
  FrameStack frames;
  signal::Waveform audio;
  /// Renders at microphone rotations +90 and -90 degrees (S3R targets); empty
  /// when the dataset was generated without them.
  std::vector<signal::Waveform> s3r_targets;
  /// [frames, semantic_bins] class occupancy, kBackgroundLabel where empty.
  std::vector<uint8_t> labels;
  int semantic_bins = 0;

  /// Class of the first source; scene-level label for the linear probe.
  int scene_class() const { return scene.sources.front().class_id; }
};

inline constexpr double kS3rRotations[2] = {90.0, -90.0};

SceneSpec sample_scene(const SceneGenConfig& config, Rng& rng);

/// Mono signal of one source: class tone with seeded overtones times the
/// loudness ramp.
std::vector<double> source_waveform(const SceneGenConfig& config, const SourceSpec& src,
                                    double duration);

/// Binaural render of a (possibly moving) scene. Static scenes give exactly the
/// output of signal::render_binaural.
signal::Waveform render_scene_audio(const SceneGenConfig& config, const SceneSpec& scene,
                                    double mic_rotation_deg);

/// Column of an azimuth in an equirectangular frame: W * (theta + 180) / 360.
double azimuth_to_column(double azimuth_deg, int width);
int azimuth_to_bin(double azimuth_deg, int bins);

FrameStack render_frames(const SceneGenConfig& config, const SceneSpec& scene);
std::vector<uint8_t> semantic_labels(const SceneGenConfig& config, const SceneSpec& scene);

/// Full sample with 16-bit-quantized audio, ready to be written.
AVSample make_sample(const SceneGenConfig& config, const SceneSpec& scene, std::string id);

}  // namespace multissl::scenegen
