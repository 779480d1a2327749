#include "multissl/core/grid.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "multissl/core/error.hpp"

namespace multissl {

static_assert(std::endian::native == std::endian::little, "grid I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'M', 'S', 'G', 'R', 'I', 'D', '0', '1'};

template <typename T>
Grid pack(std::vector<uint32_t> dims, std::span<const T> values, GridType type) {
  Grid g;
  g.type = type;
  g.dims = std::move(dims);
  if (g.count() != values.size()) throw Error("grid: value count does not match dimensions");
  g.payload.resize(values.size_bytes());
  if (!values.empty()) std::memcpy(g.payload.data(), values.data(), values.size_bytes());
  return g;
}

template <typename T>
std::vector<T> unpack(const Grid& g, GridType type) {
  if (g.type != type) throw Error("grid: unexpected element type");
  std::vector<T> out(g.count());
  if (!out.empty()) std::memcpy(out.data(), g.payload.data(), g.payload.size());
  return out;
}

}  // namespace

size_t Grid::element_size(GridType t) {
  switch (t) {
    case GridType::kFloat32: return 4;
    case GridType::kUint8: return 1;
    case GridType::kFloat64: return 8;
  }
  throw Error("grid: unknown element type");
}

size_t Grid::count() const {
  size_t n = 1;
  for (uint32_t d : dims) n *= d;
  return n;
}

void write_grid(const std::filesystem::path& path, const Grid& grid) {
  if (grid.dims.empty() || grid.dims.size() > 8) throw Error("grid: rank must be 1..8");
  if (grid.payload.size() != grid.count() * Grid::element_size(grid.type)) {
    throw Error("grid: payload size does not match dimensions");
  }
  std::vector<unsigned char> bytes(12 + 4 * grid.dims.size() + grid.payload.size());
  std::memcpy(bytes.data(), kMagic, 8);
  bytes[8] = static_cast<unsigned char>(grid.type);
  bytes[9] = static_cast<unsigned char>(grid.dims.size());
  std::memcpy(bytes.data() + 12, grid.dims.data(), 4 * grid.dims.size());
  if (!grid.payload.empty()) {
    std::memcpy(bytes.data() + 12 + 4 * grid.dims.size(), grid.payload.data(), grid.payload.size());
  }
  write_file_bytes(path, bytes);
}

Grid read_grid(const std::filesystem::path& path) {
  auto bytes = read_file_bytes(path);
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kMagic, 8) != 0) {
    throw IoError("grid: bad magic in " + path.string());
  }
  Grid g;
  g.type = static_cast<GridType>(bytes[8]);
  const size_t rank = bytes[9];
  if (rank == 0 || rank > 8) throw IoError("grid: bad rank in " + path.string());
  if (bytes.size() < 12 + 4 * rank) throw IoError("grid: truncated header in " + path.string());
  g.dims.resize(rank);
  std::memcpy(g.dims.data(), bytes.data() + 12, 4 * rank);
  const size_t want = g.count() * Grid::element_size(g.type);
  if (bytes.size() != 12 + 4 * rank + want) throw IoError("grid: truncated payload in " + path.string());
  g.payload.assign(bytes.begin() + static_cast<std::ptrdiff_t>(12 + 4 * rank), bytes.end());
  return g;
}

Grid make_grid(std::vector<uint32_t> dims, std::span<const float> values) {
  return pack(std::move(dims), values, GridType::kFloat32);
}
Grid make_grid(std::vector<uint32_t> dims, std::span<const uint8_t> values) {
  return pack(std::move(dims), values, GridType::kUint8);
}
Grid make_grid(std::vector<uint32_t> dims, std::span<const double> values) {
  return pack(std::move(dims), values, GridType::kFloat64);
}

std::vector<float> grid_as_float32(const Grid& g) { return unpack<float>(g, GridType::kFloat32); }
std::vector<uint8_t> grid_as_uint8(const Grid& g) { return unpack<uint8_t>(g, GridType::kUint8); }
std::vector<double> grid_as_float64(const Grid& g) { return unpack<double>(g, GridType::kFloat64); }

std::vector<unsigned char> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, std::span<const unsigned char> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  write_file_bytes(path, std::span(reinterpret_cast<const unsigned char*>(text.data()), text.size()));
}

std::string read_text_file(const std::filesystem::path& path) {
  auto bytes = read_file_bytes(path);
  return {bytes.begin(), bytes.end()};
}

}  // namespace multissl
