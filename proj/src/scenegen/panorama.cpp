#include "multissl/scenegen/panorama.hpp"

#include <cmath>

#include "multissl/core/error.hpp"

namespace multissl::scenegen {

FrameStack rotate_panorama(const FrameStack& frames, int rotation_bin, int bins) {
  if (bins <= 0 || frames.width % bins != 0) {
    throw Error("rotate_panorama: width " + std::to_string(frames.width) + " not divisible by " +
                std::to_string(bins) + " bins");
  }
  if (rotation_bin < 0 || rotation_bin >= bins) throw Error("rotate_panorama: rotation bin out of range");
  const int shift = rotation_bin * (frames.width / bins);
  FrameStack out = frames;
  const int W = frames.width;
  for (int f = 0; f < frames.count; ++f) {
    for (int y = 0; y < frames.height; ++y) {
      const size_t row = (static_cast<size_t>(f) * frames.height + y) * W;
      for (int x = 0; x < W; ++x) out.pixels[row + x] = frames.pixels[row + (x + shift) % W];
    }
  }
  return out;
}

FrameStack flow_features(const FrameStack& frames) {
  if (frames.count < 2) throw Error("flow_features: need at least 2 frames");
  FrameStack out{frames.count - 1, frames.height, frames.width, {}};
  const size_t plane = static_cast<size_t>(frames.height) * frames.width;
  out.pixels.resize(plane * out.count);
  for (int f = 0; f < out.count; ++f) {
    for (size_t i = 0; i < plane; ++i) {
      out.pixels[f * plane + i] = std::abs(frames.pixels[(f + 1) * plane + i] - frames.pixels[f * plane + i]);
    }
  }
  return out;
}

FrameStack mean_frame(const FrameStack& frames) {
  if (frames.count < 1) throw Error("mean_frame: empty stack");
  FrameStack out{1, frames.height, frames.width, {}};
  const size_t plane = static_cast<size_t>(frames.height) * frames.width;
  out.pixels.assign(plane, 0.0f);
  for (size_t i = 0; i < plane; ++i) {
    double acc = 0.0;
    for (int f = 0; f < frames.count; ++f) acc += frames.pixels[f * plane + i];
    out.pixels[i] = static_cast<float>(acc / frames.count);
  }
  return out;
}

}  // namespace multissl::scenegen
