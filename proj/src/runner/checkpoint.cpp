#include "multissl/runner/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "multissl/core/error.hpp"
#include "multissl/core/hash.hpp"

namespace multissl::runner {

namespace fs = std::filesystem;
using nlohmann::json;
using nn::Tensor;

static_assert(std::endian::native == std::endian::little, "checkpoints are written little-endian");

namespace {

constexpr char kMagic[8] = {'M', 'S', 'S', 'L', 'C', 'K', 'P', 'T'};

int64_t count(const nn::Shape& s) {
  int64_t n = 1;
  for (int d : s) n *= d;
  return n;
}

void write_tensor(std::ostream& out, const Tensor& t) {
  out.write(reinterpret_cast<const char*>(t.data.data()), static_cast<std::streamsize>(t.data.size() * sizeof(double)));
}

class Reader {
 public:
  Reader(const std::string& bytes, const fs::path& path) : bytes_(bytes), path_(path) {}

  void read(void* dst, size_t n) {
    if (pos_ + n > bytes_.size()) throw IoError("checkpoint " + path_.string() + " is truncated");
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }
  Tensor tensor(const nn::Shape& shape) {
    Tensor t(shape);
    read(t.data.data(), t.data.size() * sizeof(double));
    return t;
  }
  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  const std::string& bytes_;
  const fs::path& path_;
  size_t pos_ = 0;
};

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

void save_checkpoint(const fs::path& path, const Checkpoint& ckpt) {
  ckpt.state.check_finite();
  json index = json::array();
  for (const auto& [name, t] : ckpt.state.params) index.push_back({{"name", name}, {"shape", t.shape}});
  json slots = json::array();
  for (const auto& [name, s] : ckpt.state.optimizer_slots) slots.push_back({{"name", name}, {"shape", s.m.shape}});
  const json header{{"version", kCheckpointVersion},
                    {"config_hash", ckpt.meta.config_hash},
                    {"trunk", ckpt.meta.trunk},
                    {"strategy", ckpt.meta.strategy},
                    {"tasks", ckpt.meta.tasks},
                    {"seed", ckpt.meta.seed},
                    {"step", ckpt.state.step},
                    {"optimizer_steps", ckpt.state.optimizer_steps},
                    {"params", index},
                    {"optimizer_slots", slots}};
  const std::string text = header.dump();

  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint " + tmp.string());
    const uint32_t version = kCheckpointVersion;
    const uint64_t len = text.size();
    out.write(kMagic, sizeof kMagic);
    out.write(reinterpret_cast<const char*>(&version), sizeof version);
    out.write(reinterpret_cast<const char*>(&len), sizeof len);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& [name, t] : ckpt.state.params) write_tensor(out, t);
    for (const auto& [name, s] : ckpt.state.optimizer_slots) {
      write_tensor(out, s.m);
      write_tensor(out, s.v);
    }
    if (!out) throw IoError("failed writing checkpoint " + tmp.string());
  }
  fs::rename(tmp, path);
}

Checkpoint load_checkpoint(const fs::path& path, const std::string& expected_hash, bool force) {
  const std::string bytes = read_file(path);
  Reader r(bytes, path);
  char magic[8];
  r.read(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof magic) != 0) throw IoError(path.string() + " is not a checkpoint");
  uint32_t version = 0;
  r.read(&version, sizeof version);
  if (version != kCheckpointVersion) {
    throw IoError("checkpoint " + path.string() + " has format version " + std::to_string(version) +
                  ", this build reads version " + std::to_string(kCheckpointVersion));
  }
  uint64_t len = 0;
  r.read(&len, sizeof len);
  std::string text(len, '\0');
  r.read(text.data(), len);
  json header;
  try {
    header = json::parse(text);
  } catch (const json::exception& e) {
    throw IoError("checkpoint " + path.string() + " has a corrupt header: " + e.what());
  }

  Checkpoint c;
  header.at("config_hash").get_to(c.meta.config_hash);
  c.meta.trunk = header.at("trunk");
  header.at("strategy").get_to(c.meta.strategy);
  header.at("tasks").get_to(c.meta.tasks);
  header.at("seed").get_to(c.meta.seed);
  header.at("step").get_to(c.state.step);
  header.at("optimizer_steps").get_to(c.state.optimizer_steps);
  if (!expected_hash.empty() && c.meta.config_hash != expected_hash && !force) {
    throw IoError("checkpoint " + path.string() + " was written under config " + c.meta.config_hash +
                  ", the current config is " + expected_hash + " (pass --force to load anyway)");
  }
  for (const auto& e : header.at("params")) {
    const auto shape = e.at("shape").get<nn::Shape>();
    if (count(shape) < 0) throw IoError("checkpoint has an invalid tensor shape");
    c.state.params.emplace_back(e.at("name").get<std::string>(), r.tensor(shape));
  }
  for (const auto& e : header.at("optimizer_slots")) {
    const auto shape = e.at("shape").get<nn::Shape>();
    nn::AdamSlot s;
    s.m = r.tensor(shape);
    s.v = r.tensor(shape);
    c.state.optimizer_slots.emplace(e.at("name").get<std::string>(), std::move(s));
  }
  if (!r.at_end()) throw IoError("checkpoint " + path.string() + " has trailing bytes");
  return c;
}

std::unique_ptr<nn::Trunk> restore_trunk(const Checkpoint& ckpt) {
  auto trunk = nn::make_trunk(ckpt.meta.trunk);
  const auto values = nn::with_prefix(ckpt.state.params, "trunk.");
  const auto params = trunk->parameters();
  if (static_cast<size_t>(values.size()) != params.size()) {
    throw IoError("checkpoint holds " + std::to_string(values.size()) + " trunk tensors, the described trunk has " +
                  std::to_string(params.size()));
  }
  nn::restore(params, values);
  return trunk;
}

std::string file_hash(const fs::path& path) { return hex64(fnv1a64(read_file(path))); }

}  // namespace multissl::runner
