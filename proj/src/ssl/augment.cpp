#include "multissl/ssl/augment.hpp"

#include <algorithm>
#include <cmath>

#include "multissl/core/error.hpp"

namespace multissl::ssl {

using nn::Tensor;

Tensor crop_resize(const Tensor& frame, int y0, int x0, int h, int w) {
  if (frame.rank() != 3) throw Error("crop_resize: expected [C,H,W], got " + nn::to_string(frame.shape));
  const int C = frame.dim(0), H = frame.dim(1), W = frame.dim(2);
  if (h < 1 || w < 1 || y0 < 0 || x0 < 0 || y0 + h > H || x0 + w > W) throw Error("crop_resize: box out of range");
  Tensor out(frame.shape);
  for (int c = 0; c < C; ++c) {
    for (int y = 0; y < H; ++y) {
      const int sy = y0 + y * h / H;
      for (int x = 0; x < W; ++x) {
        const int sx = x0 + x * w / W;
        out[(static_cast<int64_t>(c) * H + y) * W + x] = frame[(static_cast<int64_t>(c) * H + sy) * W + sx];
      }
    }
  }
  return out;
}

Tensor circular_shift(const Tensor& frame, int shift) {
  const int C = frame.dim(0), H = frame.dim(1), W = frame.dim(2);
  shift = ((shift % W) + W) % W;
  Tensor out(frame.shape);
  for (int r = 0; r < C * H; ++r) {
    for (int x = 0; x < W; ++x) out[static_cast<int64_t>(r) * W + x] = frame[static_cast<int64_t>(r) * W + (x + shift) % W];
  }
  return out;
}

Tensor augment_view(const Tensor& frame, const AugmentConfig& config, Rng& rng) {
  const int H = frame.dim(1), W = frame.dim(2);
  const int h = std::max(1, static_cast<int>(std::lround(H * rng.uniform(config.min_crop, 1.0))));
  const int w = std::max(1, static_cast<int>(std::lround(W * rng.uniform(config.min_crop, 1.0))));
  const int y0 = rng.uniform_int(H - h + 1);
  const int x0 = rng.uniform_int(W - w + 1);
  Tensor out = crop_resize(frame, y0, x0, h, w);
  if (config.circular_shift) out = circular_shift(out, rng.uniform_int(W));
  const double gain = rng.uniform(1.0 - config.brightness, 1.0 + config.brightness);
  const double offset = rng.uniform(-config.offset, config.offset);
  for (auto& v : out.data) v = v * gain + offset;
  return out;
}

}  // namespace multissl::ssl
