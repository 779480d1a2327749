#include "multissl/scenegen/dataset.hpp"

#include <cstdio>

#include <nlohmann/json.hpp>

#include "multissl/core/error.hpp"
#include "multissl/core/grid.hpp"
#include "multissl/signal/wav.hpp"

namespace multissl::scenegen {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr Split kSplits[] = {Split::kTrain, Split::kVal, Split::kTest};

int split_size(const SceneGenConfig& c, Split s) {
  switch (s) {
    case Split::kTrain: return c.train;
    case Split::kVal: return c.val;
    case Split::kTest: return c.test;
  }
  return 0;
}

std::string sample_id(Split s, int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s-%05d", split_name(s), index);
  return buf;
}

AVSample generate_sample(const SceneGenConfig& config, uint64_t seed, Split s, int index) {
  Rng rng = Rng(seed).derive(split_name(s)).derive(static_cast<uint64_t>(index));
  return make_sample(config, sample_scene(config, rng), sample_id(s, index));
}

std::vector<std::string>& ids_of(DatasetManifest& m, Split s) {
  switch (s) {
    case Split::kTrain: return m.train;
    case Split::kVal: return m.val;
    case Split::kTest: return m.test;
  }
  throw Error("bad split");
}

std::vector<AVSample>& samples_of(Dataset& d, Split s) {
  switch (s) {
    case Split::kTrain: return d.train;
    case Split::kVal: return d.val;
    case Split::kTest: return d.test;
  }
  throw Error("bad split");
}

const char* kRotationFiles[2] = {"audio_rot_p90.wav", "audio_rot_m90.wav"};

}  // namespace

const char* split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "?";
}

const std::vector<std::string>& DatasetManifest::ids(Split s) const {
  return ids_of(const_cast<DatasetManifest&>(*this), s);
}

const std::vector<AVSample>& Dataset::split(Split s) const {
  return samples_of(const_cast<Dataset&>(*this), s);
}

bool Dataset::has_s3r_targets() const {
  for (Split s : kSplits) {
    for (const auto& smp : split(s)) {
      if (smp.s3r_targets.size() != 2) return false;
    }
  }
  return true;
}

void write_sample(const fs::path& dir, const AVSample& s) {
  fs::create_directories(dir);
  write_grid(dir / "frames.grid",
             make_grid({static_cast<uint32_t>(s.frames.count), static_cast<uint32_t>(s.frames.height),
                        static_cast<uint32_t>(s.frames.width)},
                       std::span<const float>(s.frames.pixels)));
  signal::write_wav(dir / "audio.wav", s.audio);
  for (size_t k = 0; k < s.s3r_targets.size(); ++k) signal::write_wav(dir / kRotationFiles[k], s.s3r_targets[k]);
  const uint32_t frames = static_cast<uint32_t>(s.labels.size() / static_cast<size_t>(s.semantic_bins));
  write_grid(dir / "labels.grid",
             make_grid({frames, static_cast<uint32_t>(s.semantic_bins)}, std::span<const uint8_t>(s.labels)));
  json scene = s.scene;
  scene["id"] = s.id;
  write_text_file(dir / "scene.json", scene.dump(2) + "\n");
}

AVSample read_sample(const fs::path& dir, int semantic_bins) {
  AVSample s;
  const json scene = json::parse(read_text_file(dir / "scene.json"));
  s.scene = scene.get<SceneSpec>();
  s.id = scene.at("id").get<std::string>();
  const Grid frames = read_grid(dir / "frames.grid");
  if (frames.dims.size() != 3) throw IoError("frames.grid must be rank 3 in " + dir.string());
  s.frames = {static_cast<int>(frames.dims[0]), static_cast<int>(frames.dims[1]),
              static_cast<int>(frames.dims[2]), grid_as_float32(frames)};
  s.audio = signal::read_wav(dir / "audio.wav");
  for (const char* name : kRotationFiles) {
    if (fs::exists(dir / name)) s.s3r_targets.push_back(signal::read_wav(dir / name));
  }
  const Grid labels = read_grid(dir / "labels.grid");
  if (labels.dims.size() != 2 || static_cast<int>(labels.dims[1]) != semantic_bins) {
    throw IoError("labels.grid shape does not match semantic_bins in " + dir.string());
  }
  s.labels = grid_as_uint8(labels);
  s.semantic_bins = semantic_bins;
  return s;
}

DatasetManifest generate_dataset(const fs::path& root, const SceneGenConfig& config, uint64_t seed) {
  config.validate();
  if (config.train < 1) throw ConfigError("scenegen: n_samples (train) must be >= 1");
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec || !fs::is_directory(root)) throw IoError("cannot create dataset root " + root.string());

  DatasetManifest m;
  m.root = root;
  m.seed = seed;
  m.config_hash = config_hash(config);
  json splits = json::object();
  for (Split s : kSplits) {
    auto& ids = ids_of(m, s);
    for (int i = 0; i < split_size(config, s); ++i) {
      AVSample smp = generate_sample(config, seed, s, i);
      write_sample(root / split_name(s) / smp.id, smp);
      ids.push_back(smp.id);
    }
    splits[split_name(s)] = ids;
  }
  json manifest{{"format_version", kDatasetFormatVersion},
                {"config_hash", m.config_hash},
                {"seed", seed},
                {"generator", json(config)},
                {"splits", splits}};
  write_text_file(root / "manifest.json", manifest.dump(2) + "\n");
  return m;
}

Dataset generate_in_memory(const SceneGenConfig& config, uint64_t seed) {
  config.validate();
  if (config.train < 1) throw ConfigError("scenegen: n_samples (train) must be >= 1");
  Dataset d;
  d.config = config;
  d.manifest.seed = seed;
  d.manifest.config_hash = config_hash(config);
  for (Split s : kSplits) {
    for (int i = 0; i < split_size(config, s); ++i) {
      samples_of(d, s).push_back(generate_sample(config, seed, s, i));
      ids_of(d.manifest, s).push_back(samples_of(d, s).back().id);
    }
  }
  return d;
}

DatasetManifest read_manifest(const fs::path& root) {
  const json j = json::parse(read_text_file(root / "manifest.json"));
  if (j.at("format_version").get<int>() != kDatasetFormatVersion) {
    throw IoError("dataset format version " + std::to_string(j.at("format_version").get<int>()) +
                  " is not supported (expected " + std::to_string(kDatasetFormatVersion) + ")");
  }
  DatasetManifest m;
  m.root = root;
  m.config_hash = j.at("config_hash").get<std::string>();
  m.seed = j.at("seed").get<uint64_t>();
  for (Split s : kSplits) ids_of(m, s) = j.at("splits").at(split_name(s)).get<std::vector<std::string>>();
  return m;
}

Dataset load_dataset(const fs::path& root) {
  Dataset d;
  d.manifest = read_manifest(root);
  const json j = json::parse(read_text_file(root / "manifest.json"));
  d.config = j.at("generator").get<SceneGenConfig>();
  if (config_hash(d.config) != d.manifest.config_hash) {
    throw IoError("manifest config hash does not match its generator section in " + root.string());
  }
  for (Split s : kSplits) {
    for (const auto& id : d.manifest.ids(s)) {
      samples_of(d, s).push_back(read_sample(root / split_name(s) / id, d.config.semantic_bins));
    }
  }
  return d;
}

Dataset load_or_generate(const fs::path& root, const SceneGenConfig& config, uint64_t seed) {
  if (fs::exists(root / "manifest.json")) {
    const auto m = read_manifest(root);
    if (m.config_hash == config_hash(config) && m.seed == seed) return load_dataset(root);
    throw IoError("dataset at " + root.string() + " was generated from a different config or seed");
  }
  generate_dataset(root, config, seed);
  return load_dataset(root);
}

}  // namespace multissl::scenegen
