#include "multissl/signal/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "multissl/core/error.hpp"
#include "multissl/core/grid.hpp"

namespace multissl::signal {
namespace {

constexpr double kPcmScale = 32767.0;

int16_t to_pcm(double v) {
  return static_cast<int16_t>(std::lround(std::clamp(v, -1.0, 1.0) * kPcmScale));
}

void put_u32(std::vector<unsigned char>& b, uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<unsigned char>(v >> (8 * i)));
}
void put_u16(std::vector<unsigned char>& b, uint16_t v) {
  b.push_back(static_cast<unsigned char>(v));
  b.push_back(static_cast<unsigned char>(v >> 8));
}
uint32_t get_u32(const unsigned char* p) {
  return p[0] | (p[1] << 8) | (p[2] << 16) | (static_cast<uint32_t>(p[3]) << 24);
}
uint16_t get_u16(const unsigned char* p) { return static_cast<uint16_t>(p[0] | (p[1] << 8)); }

}  // namespace

void quantize_pcm16(Waveform& w) {
  for (auto& ch : w.channels) {
    for (auto& v : ch) v = to_pcm(v) / kPcmScale;
  }
}

void write_wav(const std::filesystem::path& path, const Waveform& w) {
  w.validate();
  const uint32_t frames = static_cast<uint32_t>(w.length());
  const uint32_t data_bytes = frames * 4;
  std::vector<unsigned char> b;
  b.reserve(44 + data_bytes);
  for (char c : std::string("RIFF")) b.push_back(static_cast<unsigned char>(c));
  put_u32(b, 36 + data_bytes);
  for (char c : std::string("WAVEfmt ")) b.push_back(static_cast<unsigned char>(c));
  put_u32(b, 16);
  put_u16(b, 1);  // PCM
  put_u16(b, 2);
  put_u32(b, static_cast<uint32_t>(w.sample_rate));
  put_u32(b, static_cast<uint32_t>(w.sample_rate) * 4);
  put_u16(b, 4);
  put_u16(b, 16);
  for (char c : std::string("data")) b.push_back(static_cast<unsigned char>(c));
  put_u32(b, data_bytes);
  for (uint32_t n = 0; n < frames; ++n) {
    for (int c = 0; c < 2; ++c) put_u16(b, static_cast<uint16_t>(to_pcm(w.channels[static_cast<size_t>(c)][n])));
  }
  write_file_bytes(path, b);
}

Waveform read_wav(const std::filesystem::path& path) {
  const auto b = read_file_bytes(path);
  if (b.size() < 12 || std::memcmp(b.data(), "RIFF", 4) != 0 || std::memcmp(b.data() + 8, "WAVE", 4) != 0) {
    throw IoError("not a RIFF/WAVE file: " + path.string());
  }
  int channels = 0, bits = 0, rate = 0;
  size_t pos = 12;
  while (pos + 8 <= b.size()) {
    const uint32_t size = get_u32(b.data() + pos + 4);
    const unsigned char* body = b.data() + pos + 8;
    if (pos + 8 + size > b.size()) throw IoError("truncated chunk in " + path.string());
    if (std::memcmp(b.data() + pos, "fmt ", 4) == 0) {
      if (get_u16(body) != 1) throw IoError("only PCM wav is supported: " + path.string());
      channels = get_u16(body + 2);
      rate = static_cast<int>(get_u32(body + 4));
      bits = get_u16(body + 14);
    } else if (std::memcmp(b.data() + pos, "data", 4) == 0) {
      if (channels != 2) throw Error("binaural required: " + path.string() + " has " + std::to_string(channels) + " channels");
      if (bits != 16) throw IoError("only 16-bit wav is supported: " + path.string());
      const size_t frames = size / 4;
      Waveform w = Waveform::silence(rate, frames);
      for (size_t n = 0; n < frames; ++n) {
        for (int c = 0; c < 2; ++c) {
          const auto v = static_cast<int16_t>(get_u16(body + 4 * n + 2 * static_cast<size_t>(c)));
          w.channels[static_cast<size_t>(c)][n] = v / kPcmScale;
        }
      }
      return w;
    }
    pos += 8 + size + (size & 1);
  }
  throw IoError("no data chunk in " + path.string());
}

}  // namespace multissl::signal
