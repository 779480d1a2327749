#include "multissl/runner/config.hpp"

#include <fstream>
#include <sstream>

#include "multissl/core/error.hpp"
#include "multissl/core/hash.hpp"
#include "multissl/defaults_json.hpp"

namespace multissl::runner {

using nlohmann::json;

namespace {

std::string join_path(const std::vector<std::string>& path) {
  std::string out;
  for (const auto& p : path) out += (out.empty() ? "" : ".") + p;
  return out;
}

int line_at(const std::string& text, size_t pos) {
  int line = 1;
  for (size_t i = 0; i < pos && i < text.size(); ++i) line += text[i] == '\n';
  return line;
}

/// Line of the last key of `path` in `text`, found by scanning for each key in
/// turn; 0 when it cannot be located.
int line_of_key(const std::string& text, const std::vector<std::string>& path) {
  size_t pos = 0;
  for (const auto& key : path) {
    const std::string quoted = "\"" + key + "\"";
    for (;;) {
      pos = text.find(quoted, pos);
      if (pos == std::string::npos) return 0;
      size_t after = pos + quoted.size();
      while (after < text.size() && std::isspace(static_cast<unsigned char>(text[after]))) ++after;
      if (after < text.size() && text[after] == ':') break;
      pos += quoted.size();
    }
  }
  return line_at(text, pos);
}

std::string type_word(const json& v) {
  switch (v.type()) {
    case json::value_t::number_integer:
    case json::value_t::number_unsigned: return "an integer";
    case json::value_t::number_float: return "a number";
    case json::value_t::string: return "a string";
    case json::value_t::boolean: return "a boolean";
    case json::value_t::array: return "an array";
    case json::value_t::object: return "an object";
    default: return "null";
  }
}

std::string expected_word(const json& base) {
  if (base.is_number_unsigned()) return "a non-negative integer";
  if (base.is_array() && !base.empty()) return "an array of " + type_word(base.front()).substr(2) + "s";
  return type_word(base);
}

bool compatible(const json& base, const json& v) {
  if (base.is_number_unsigned()) return v.is_number_unsigned();
  if (base.is_number_integer()) return v.is_number_integer();
  if (base.is_number_float()) return v.is_number();
  if (base.is_array()) {
    if (!v.is_array()) return false;
    if (base.empty()) return true;
    for (const auto& e : v) {
      if (!compatible(base.front(), e)) return false;
    }
    return true;
  }
  return base.type() == v.type();
}

struct Overlay {
  const std::string& source;
  const std::string& source_name;

  [[noreturn]] void fail(const std::vector<std::string>& path, const std::string& what) const {
    std::ostringstream msg;
    if (!source_name.empty()) msg << source_name;
    if (!source.empty()) {
      if (const int line = line_of_key(source, path); line > 0) msg << ":" << line;
    }
    if (!source_name.empty()) msg << ": ";
    msg << join_path(path) << ": " << what;
    throw ConfigError(msg.str());
  }

  void apply(json& base, const json& patch, std::vector<std::string>& path) const {
    if (!patch.is_object()) fail(path, "expected an object");
    for (auto it = patch.begin(); it != patch.end(); ++it) {
      path.push_back(it.key());
      if (!base.contains(it.key())) fail(path, "unknown key");
      json& slot = base[it.key()];
      if (slot.is_object()) {
        apply(slot, it.value(), path);
      } else {
        if (!compatible(slot, it.value())) {
          fail(path, "expected " + expected_word(slot) + ", got " + type_word(it.value()));
        }
        slot = it.value();
      }
      path.pop_back();
    }
  }
};

template <typename T>
T section(const json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config section '") + key + "': " + e.what());
  }
}

}  // namespace

const json& default_config_json() {
  static const json defaults = json::parse(kDefaultConfigJson);
  return defaults;
}

void overlay_checked(json& base, const json& patch, const std::string& source, const std::string& source_name) {
  std::vector<std::string> path;
  Overlay{source, source_name}.apply(base, patch, path);
}

json parse_config_text(const std::string& text, const std::string& source_name) {
  json user;
  try {
    user = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(source_name + ":" + std::to_string(line_at(text, e.byte == 0 ? 0 : e.byte - 1)) +
                      ": malformed JSON (" + e.what() + ")");
  }
  json merged = default_config_json();
  overlay_checked(merged, user, text, source_name);
  return merged;
}

json load_config_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path.string());
}

RunConfig config_from_json(const json& j) {
  RunConfig c;
  c.seed = section<uint64_t>(j, "seed");
  c.data_seed = section<uint64_t>(j, "data_seed");
  c.run_id = section<std::string>(j, "run_id");
  c.dataset_path = section<std::string>(j, "dataset_path");
  c.dataset = section<scenegen::SceneGenConfig>(j, "dataset");
  c.input = section<ssl::InputSpec>(j, "input");
  const json enc = section<json>(j, "encoder");
  c.encoders.sound = section<nn::EncoderConfig>(enc, "sound");
  c.encoders.visual = section<nn::EncoderConfig>(enc, "visual");
  c.tasks = section<ssl::TaskHyper>(j, "tasks");
  c.train = section<combine::TrainConfig>(j, "train");
  c.combiner = section<combine::CombinerConfig>(j, "combiner");
  c.downstream = section<downstream::DownstreamConfig>(j, "downstream");
  return c;
}

json config_to_json(const RunConfig& c) {
  return json{{"seed", c.seed},
              {"data_seed", c.data_seed},
              {"run_id", c.run_id},
              {"dataset_path", c.dataset_path},
              {"dataset", c.dataset},
              {"input", c.input},
              {"encoder", {{"sound", c.encoders.sound}, {"visual", c.encoders.visual}}},
              {"tasks", c.tasks},
              {"train", c.train},
              {"combiner", c.combiner},
              {"downstream", c.downstream}};
}

void RunConfig::validate() const {
  dataset.validate();
  input.validate();
  if (encoders.sound.kind != nn::EncoderKind::kSound) throw ConfigError("encoder.sound.kind must be 'sound'");
  if (encoders.visual.kind != nn::EncoderKind::kVisual) throw ConfigError("encoder.visual.kind must be 'visual'");
  if (encoders.sound.input_channels != 2) throw ConfigError("encoder.sound.input_channels must be 2 (binaural)");
  if (encoders.visual.input_channels != 1) throw ConfigError("encoder.visual.input_channels must be 1");
  encoders.sound.validate();
  encoders.visual.validate();
  tasks.validate();
  train.validate();
  combiner.validate();
  downstream.validate();
  if (input.segment_seconds > dataset.duration) throw ConfigError("input.segment_seconds exceeds dataset.duration");
  if (tasks.batch_size > dataset.train) throw ConfigError("tasks.batch_size exceeds the training split size");
}

std::string config_hash(const RunConfig& c) {
  json j = config_to_json(c);
  j.erase("run_id");
  return hex64(fnv1a64(j.dump()));
}

}  // namespace multissl::runner
