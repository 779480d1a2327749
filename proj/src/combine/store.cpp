#include "multissl/combine/store.hpp"

#include <cstring>
#include <nlohmann/json.hpp>
#include <set>

#include "multissl/core/error.hpp"
#include "multissl/core/grid.hpp"
#include "multissl/core/hash.hpp"

namespace multissl::combine {

using nlohmann::json;
using nn::Tensor;

namespace {

std::filesystem::path with_ext(const std::filesystem::path& stem, const char* ext) {
  return stem.parent_path() / (stem.filename().string() + ext);
}

}  // namespace

void SampleTable::seal(ssl::TaskId task, std::string kind, std::vector<std::string> ids, Tensor rows,
                       std::string model_hash) {
  if (sealed(task)) throw Error(std::string("task ") + ssl::task_name(task) + " is already sealed");
  if (rows.rank() != 2 || rows.dim(0) != static_cast<int>(ids.size())) {
    throw Error("seal: expected one row per sample id, got " + nn::to_string(rows.shape) + " for " +
                std::to_string(ids.size()) + " ids");
  }
  Entry e;
  e.kind = std::move(kind);
  e.dim = rows.dim(1);
  e.model_hash = std::move(model_hash);
  e.ids = std::move(ids);
  for (size_t i = 0; i < e.ids.size(); ++i) {
    if (!e.index.emplace(e.ids[i], static_cast<int>(i)).second) throw Error("seal: duplicate sample id " + e.ids[i]);
  }
  e.rows = std::move(rows);
  entries_.emplace(task, std::move(e));
}

const SampleTable::Entry& SampleTable::entry(ssl::TaskId task) const {
  auto it = entries_.find(task);
  if (it == entries_.end()) throw Error(std::string("no sealed entries for task ") + ssl::task_name(task));
  return it->second;
}

Tensor SampleTable::lookup(ssl::TaskId task, std::span<const std::string> ids) const {
  const Entry& e = entry(task);
  Tensor out({static_cast<int>(ids.size()), e.dim});
  for (size_t i = 0; i < ids.size(); ++i) {
    auto it = e.index.find(ids[i]);
    if (it == e.index.end()) {
      throw Error(std::string("missing stored entry for sample ") + ids[i] + " of task " + ssl::task_name(task));
    }
    std::copy_n(e.rows.data.begin() + static_cast<std::ptrdiff_t>(it->second) * e.dim, e.dim,
                out.data.begin() + static_cast<std::ptrdiff_t>(i) * e.dim);
  }
  return out;
}

void SampleTable::check_covers(std::span<const std::string> ids) const {
  const std::set<std::string> want(ids.begin(), ids.end());
  for (const auto& [task, e] : entries_) {
    if (std::set<std::string>(e.ids.begin(), e.ids.end()) != want) {
      throw Error(std::string("stored entries of task ") + ssl::task_name(task) + " do not match the manifest");
    }
  }
}

void SampleTable::save(const std::filesystem::path& stem) const {
  json side{{"format_version", 1}, {"entries", json::array()}};
  std::vector<unsigned char> bin;
  int64_t offset = 0;
  for (const auto& [task, e] : entries_) {
    side["entries"].push_back({{"task", ssl::task_name(task)},
                               {"kind", e.kind},
                               {"dim", e.dim},
                               {"count", e.ids.size()},
                               {"offset", offset},
                               {"model_hash", e.model_hash},
                               {"sample_ids", e.ids}});
    const auto* p = reinterpret_cast<const unsigned char*>(e.rows.data.data());
    bin.insert(bin.end(), p, p + e.rows.data.size() * sizeof(double));
    offset += e.rows.size();
  }
  write_file_bytes(with_ext(stem, ".bin"), bin);
  write_text_file(with_ext(stem, ".json"), side.dump(2) + "\n");
}

SampleTable SampleTable::load(const std::filesystem::path& stem) {
  json side;
  try {
    side = json::parse(read_text_file(with_ext(stem, ".json")));
  } catch (const json::exception& ex) {
    throw IoError("store sidecar " + with_ext(stem, ".json").string() + " is malformed: " + ex.what());
  }
  const auto bin = read_file_bytes(with_ext(stem, ".bin"));
  SampleTable t;
  try {
    if (side.at("format_version").get<int>() != 1) throw IoError("unsupported store format version");
    for (const auto& e : side.at("entries")) {
      const int dim = e.at("dim").get<int>();
      const auto count = e.at("count").get<int64_t>();
      const auto offset = e.at("offset").get<int64_t>();
      const auto end = static_cast<size_t>(offset + count * dim) * sizeof(double);
      if (end > bin.size()) throw IoError("store file " + with_ext(stem, ".bin").string() + " is truncated");
      Tensor rows({static_cast<int>(count), dim});
      std::memcpy(rows.data.data(), bin.data() + offset * static_cast<int64_t>(sizeof(double)),
                  rows.data.size() * sizeof(double));
      t.seal(ssl::parse_task(e.at("task").get<std::string>()), e.at("kind").get<std::string>(),
             e.at("sample_ids").get<std::vector<std::string>>(), std::move(rows), e.at("model_hash").get<std::string>());
    }
  } catch (const json::exception& ex) {
    throw IoError("store sidecar is missing fields: " + std::string(ex.what()));
  }
  return t;
}

std::string model_hash(const nn::NamedParams& params) {
  uint64_t h = kFnvOffset;
  for (const auto& [name, p] : params) {
    h = fnv1a64(name, h);
    const auto& d = p.value().data;
    h = fnv1a64(std::span(reinterpret_cast<const unsigned char*>(d.data()), d.size() * sizeof(double)), h);
  }
  return hex64(h);
}

}  // namespace multissl::combine
