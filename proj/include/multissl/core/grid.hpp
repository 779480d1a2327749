#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace multissl {

/// Element type tag of a grid file.
enum class GridType : uint8_t { kFloat32 = 1, kUint8 = 2, kFloat64 = 3 };

/// Dense n-dimensional array container used for frames, labels and
/// spectrogram targets on disk.
///
/// Layout (little-endian):
///   bytes 0-7   magic "MSGRID01"
///   byte  8     element type (GridType)
///   byte  9     rank r (1..8)
///   bytes 10-11 zero
///   r x uint32  dimensions, outermost first
///   payload     row-major elements
struct Grid {
  GridType type = GridType::kFloat32;
  std::vector<uint32_t> dims;
  std::vector<unsigned char> payload;

  size_t count() const;
  static size_t element_size(GridType t);
};

void write_grid(const std::filesystem::path& path, const Grid& grid);
Grid read_grid(const std::filesystem::path& path);

Grid make_grid(std::vector<uint32_t> dims, std::span<const float> values);
Grid make_grid(std::vector<uint32_t> dims, std::span<const uint8_t> values);
Grid make_grid(std::vector<uint32_t> dims, std::span<const double> values);

std::vector<float> grid_as_float32(const Grid& grid);
std::vector<uint8_t> grid_as_uint8(const Grid& grid);
std::vector<double> grid_as_float64(const Grid& grid);

/// Whole-file helpers.
std::vector<unsigned char> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const unsigned char> bytes);
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace multissl
