#pragma once

#include <filesystem>

#include "multissl/signal/waveform.hpp"

namespace multissl::signal {

/// Rounds every sample to the nearest 16-bit PCM level so that a write/read
/// cycle is exact.
void quantize_pcm16(Waveform& w);

/// 16-bit PCM, 2-channel RIFF/WAVE.
void write_wav(const std::filesystem::path& path, const Waveform& w);
Waveform read_wav(const std::filesystem::path& path);

}  // namespace multissl::signal
