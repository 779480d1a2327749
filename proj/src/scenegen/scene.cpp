#include "multissl/scenegen/scene.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <nlohmann/json.hpp>

#include "multissl/core/error.hpp"
#include "multissl/core/hash.hpp"
#include "multissl/signal/binaural.hpp"
#include "multissl/signal/wav.hpp"

namespace multissl::scenegen {

using nlohmann::json;

void SceneGenConfig::validate() const {
  if (num_classes < 1) throw ConfigError("scenegen.num_classes must be >= 1");
  if (static_cast<int>(class_fundamentals.size()) != num_classes) {
    throw ConfigError("scenegen.class_fundamentals needs one entry per class");
  }
  if (sample_rate <= 0 || duration <= 0.0 || fps <= 0.0) {
    throw ConfigError("scenegen: sample_rate, duration and fps must be positive");
  }
  if (height < 4 || width < 8) throw ConfigError("scenegen: frames too small");
  if (semantic_bins < 1) throw ConfigError("scenegen.semantic_bins must be >= 1");
  if (min_sources < 1 || max_sources > 4 || min_sources > max_sources) {
    throw ConfigError("scenegen: source count must satisfy 1 <= min <= max <= 4");
  }
  if (!(azimuth_span > 0.0 && azimuth_span <= 360.0)) throw ConfigError("scenegen.azimuth_span must be in (0, 360]");
  if (min_speed < 0.0 || max_speed < min_speed) throw ConfigError("scenegen: bad speed range");
  if (train < 0 || val < 0 || test < 0) throw ConfigError("scenegen: split sizes must be >= 0");
  if (train + val + test == 0) throw ConfigError("scenegen: n_samples must be >= 1");
}

int SceneGenConfig::frame_count() const {
  return static_cast<int>(std::lround(duration * fps));
}

void to_json(json& j, const SceneGenConfig& c) {
  j = json{{"num_classes", c.num_classes},       {"class_fundamentals", c.class_fundamentals},
           {"sample_rate", c.sample_rate},       {"duration", c.duration},
           {"fps", c.fps},                       {"height", c.height},
           {"width", c.width},                   {"semantic_bins", c.semantic_bins},
           {"min_sources", c.min_sources},       {"max_sources", c.max_sources},
           {"azimuth_span", c.azimuth_span},     {"min_speed", c.min_speed},
           {"max_speed", c.max_speed},           {"gain_start", c.gain_start},
           {"gain_end", c.gain_end},             {"source_amplitude", c.source_amplitude},
           {"noise_level", c.noise_level},       {"s3r_targets", c.s3r_targets},
           {"train", c.train},                   {"val", c.val},
           {"test", c.test}};
}

void from_json(const json& j, SceneGenConfig& c) {
  j.at("num_classes").get_to(c.num_classes);
  j.at("class_fundamentals").get_to(c.class_fundamentals);
  j.at("sample_rate").get_to(c.sample_rate);
  j.at("duration").get_to(c.duration);
  j.at("fps").get_to(c.fps);
  j.at("height").get_to(c.height);
  j.at("width").get_to(c.width);
  j.at("semantic_bins").get_to(c.semantic_bins);
  j.at("min_sources").get_to(c.min_sources);
  j.at("max_sources").get_to(c.max_sources);
  j.at("azimuth_span").get_to(c.azimuth_span);
  j.at("min_speed").get_to(c.min_speed);
  j.at("max_speed").get_to(c.max_speed);
  j.at("gain_start").get_to(c.gain_start);
  j.at("gain_end").get_to(c.gain_end);
  j.at("source_amplitude").get_to(c.source_amplitude);
  j.at("noise_level").get_to(c.noise_level);
  j.at("s3r_targets").get_to(c.s3r_targets);
  j.at("train").get_to(c.train);
  j.at("val").get_to(c.val);
  j.at("test").get_to(c.test);
}

std::string config_hash(const SceneGenConfig& c) {
  return hex64(fnv1a64(json(c).dump()));
}

double SourceSpec::azimuth_at(double t) const {
  return signal::wrap_degrees(azimuth_start + angular_velocity * t);
}

void SceneSpec::validate(int num_classes) const {
  if (sources.empty() || sources.size() > 4) throw Error("scene must have 1..4 sources");
  for (size_t i = 0; i < sources.size(); ++i) {
    if (sources[i].class_id < 0 || sources[i].class_id >= num_classes) {
      throw Error("scene source class id out of range");
    }
    for (size_t k = 0; k < i; ++k) {
      const double d = std::abs(signal::wrap_degrees(sources[i].azimuth_start - sources[k].azimuth_start));
      if (d < 20.0) throw Error("scene sources closer than 20 degrees at t = 0");
    }
  }
}

void to_json(json& j, const SceneSpec& s) {
  json srcs = json::array();
  for (const auto& src : s.sources) {
    srcs.push_back({{"class_id", src.class_id},
                    {"azimuth_start", src.azimuth_start},
                    {"angular_velocity", src.angular_velocity},
                    {"fundamental_hz", src.fundamental_hz},
                    {"timbre_seed", src.timbre_seed}});
  }
  j = json{{"sources", srcs}, {"duration", s.duration}, {"seed", s.seed}};
}

void from_json(const json& j, SceneSpec& s) {
  s.sources.clear();
  for (const auto& e : j.at("sources")) {
    SourceSpec src;
    e.at("class_id").get_to(src.class_id);
    e.at("azimuth_start").get_to(src.azimuth_start);
    e.at("angular_velocity").get_to(src.angular_velocity);
    e.at("fundamental_hz").get_to(src.fundamental_hz);
    e.at("timbre_seed").get_to(src.timbre_seed);
    s.sources.push_back(src);
  }
  j.at("duration").get_to(s.duration);
  j.at("seed").get_to(s.seed);
}

FrameStack FrameStack::frame(int f) const {
  if (f < 0 || f >= count) throw Error("frame index out of range");
  FrameStack out{1, height, width, {}};
  const size_t plane = static_cast<size_t>(height) * width;
  out.pixels.assign(pixels.begin() + static_cast<std::ptrdiff_t>(plane * f),
                    pixels.begin() + static_cast<std::ptrdiff_t>(plane * (f + 1)));
  return out;
}

SceneSpec sample_scene(const SceneGenConfig& config, Rng& rng) {
  config.validate();
  SceneSpec scene;
  scene.duration = config.duration;
  scene.seed = rng.next_u64();
  const int n = config.min_sources + rng.uniform_int(config.max_sources - config.min_sources + 1);
  for (int tries = 0; static_cast<int>(scene.sources.size()) < n; ++tries) {
    if (tries > 10000) throw ConfigError("scenegen: azimuth_span too narrow for the source count");
    SourceSpec src;
    src.class_id = rng.uniform_int(config.num_classes);
    src.azimuth_start = signal::wrap_degrees(rng.uniform(-config.azimuth_span / 2, config.azimuth_span / 2));
    const double speed = rng.uniform(config.min_speed, config.max_speed);
    src.angular_velocity = rng.coin() ? speed : -speed;
    src.fundamental_hz = config.class_fundamentals[static_cast<size_t>(src.class_id)];
    src.timbre_seed = rng.next_u64();
    bool clear = true;
    for (const auto& other : scene.sources) {
      if (std::abs(signal::wrap_degrees(src.azimuth_start - other.azimuth_start)) < 20.0) clear = false;
    }
    if (clear) scene.sources.push_back(src);
  }
  return scene;
}

std::vector<double> source_waveform(const SceneGenConfig& config, const SourceSpec& src,
                                    double duration) {
  const size_t length = static_cast<size_t>(std::lround(duration * config.sample_rate));
  Rng timbre(src.timbre_seed);
  constexpr int kPartials = 4;
  double amp[kPartials];
  double phase[kPartials];
  double total = 0.0;
  for (int h = 0; h < kPartials; ++h) {
    amp[h] = h == 0 ? 1.0 : timbre.uniform(0.1, 0.6);
    phase[h] = timbre.uniform(0.0, 2.0 * std::numbers::pi);
    total += amp[h];
  }
  std::vector<double> out(length);
  const double nyquist = config.sample_rate / 2.0;
  for (size_t n = 0; n < length; ++n) {
    const double t = static_cast<double>(n) / config.sample_rate;
    double v = 0.0;
    for (int h = 0; h < kPartials; ++h) {
      const double f = src.fundamental_hz * (h + 1);
      if (f >= nyquist) continue;
      v += amp[h] * std::sin(2.0 * std::numbers::pi * f * t + phase[h]);
    }
    const double gain = config.gain_start + (config.gain_end - config.gain_start) * t / duration;
    out[n] = config.source_amplitude * gain * v / total;
  }
  return out;
}

signal::Waveform render_scene_audio(const SceneGenConfig& config, const SceneSpec& scene,
                                    double mic_rotation_deg) {
  const size_t length = static_cast<size_t>(std::lround(scene.duration * config.sample_rate));
  signal::Waveform out = signal::Waveform::silence(config.sample_rate, length);
  for (const auto& src : scene.sources) {
    const auto mono = source_waveform(config, src, scene.duration);
    for (size_t n = 0; n < length; ++n) {
      const double t = static_cast<double>(n) / config.sample_rate;
      const double rel = signal::relative_azimuth(src.azimuth_at(t), mic_rotation_deg);
      const auto g = signal::pan_gains(rel);
      const size_t delay = static_cast<size_t>(signal::itd_samples(rel, config.sample_rate));
      const bool left_far = std::sin(rel * std::numbers::pi / 180.0) > 0.0;
      const size_t dl = left_far ? delay : 0;
      const size_t dr = left_far ? 0 : delay;
      if (n >= dl) out.channels[0][n] += g.left * mono[n - dl];
      if (n >= dr) out.channels[1][n] += g.right * mono[n - dr];
    }
  }
  if (config.noise_level > 0.0) {
    Rng noise = Rng(scene.seed).derive("noise").derive(static_cast<uint64_t>(std::llround(mic_rotation_deg * 1000)));
    for (auto& ch : out.channels) {
      for (auto& v : ch) v += config.noise_level * noise.normal();
    }
  }
  for (auto& ch : out.channels) {
    for (auto& v : ch) v = std::clamp(v, -1.0, 1.0);
  }
  return out;
}

double azimuth_to_column(double azimuth_deg, int width) {
  return width * (signal::wrap_degrees(azimuth_deg) + 180.0) / 360.0;
}

int azimuth_to_bin(double azimuth_deg, int bins) {
  const int b = static_cast<int>(std::floor((signal::wrap_degrees(azimuth_deg) + 180.0) / 360.0 * bins));
  return std::clamp(b, 0, bins - 1);
}

FrameStack render_frames(const SceneGenConfig& config, const SceneSpec& scene) {
  FrameStack fs{config.frame_count(), config.height, config.width, {}};
  fs.pixels.assign(static_cast<size_t>(fs.count) * fs.height * fs.width, 0.0f);
  const double cy = config.height / 2.0;
  for (int f = 0; f < fs.count; ++f) {
    const double t = f / config.fps;
    for (const auto& src : scene.sources) {
      const double cx = azimuth_to_column(src.azimuth_at(t), config.width);
      // Blob size encodes the class so that appearance carries semantics.
      const double sx = config.width / 256.0 * (2.0 + 1.5 * src.class_id);
      const double sy = config.height / 64.0 * (3.0 + src.class_id);
      for (int y = 0; y < fs.height; ++y) {
        const double dy = (y - cy) / sy;
        for (int x = 0; x < fs.width; ++x) {
          double dx = std::abs(x - cx);
          dx = std::min(dx, config.width - dx);
          dx /= sx;
          auto& px = fs.pixels[(static_cast<size_t>(f) * fs.height + y) * fs.width + x];
          px = static_cast<float>(std::min(1.0, px + std::exp(-0.5 * (dx * dx + dy * dy))));
        }
      }
    }
  }
  return fs;
}

std::vector<uint8_t> semantic_labels(const SceneGenConfig& config, const SceneSpec& scene) {
  const int frames = config.frame_count();
  std::vector<uint8_t> labels(static_cast<size_t>(frames) * config.semantic_bins, kBackgroundLabel);
  for (int f = 0; f < frames; ++f) {
    const double t = f / config.fps;
    // Earlier sources win shared bins, so iterate in reverse.
    for (auto it = scene.sources.rbegin(); it != scene.sources.rend(); ++it) {
      const int bin = azimuth_to_bin(it->azimuth_at(t), config.semantic_bins);
      labels[static_cast<size_t>(f) * config.semantic_bins + bin] = static_cast<uint8_t>(it->class_id);
    }
  }
  return labels;
}

AVSample make_sample(const SceneGenConfig& config, const SceneSpec& scene, std::string id) {
  scene.validate(config.num_classes);
  AVSample s;
  s.id = std::move(id);
  s.scene = scene;
  s.frames = render_frames(config, scene);
  s.audio = render_scene_audio(config, scene, 0.0);
  signal::quantize_pcm16(s.audio);
  if (config.s3r_targets) {
    for (double rot : kS3rRotations) {
      auto w = render_scene_audio(config, scene, rot);
      signal::quantize_pcm16(w);
      s.s3r_targets.push_back(std::move(w));
    }
  }
  s.labels = semantic_labels(config, scene);
  s.semantic_bins = config.semantic_bins;
  return s;
}

}  // namespace multissl::scenegen
