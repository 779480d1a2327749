#pragma once

#include "multissl/core/rng.hpp"
#include "multissl/nn/tensor.hpp"

namespace multissl::ssl {

struct AugmentConfig {
  double min_crop = 0.7;  ///< crop side as a fraction of the frame side
  double brightness = 0.2;
  double offset = 0.1;
  bool circular_shift = true;
};

/// Random crop resized back to the input size (nearest neighbour).
nn::Tensor crop_resize(const nn::Tensor& frame, int y0, int x0, int h, int w);
/// Circular shift of columns: out[x] = in[(x + shift) mod W].
nn::Tensor circular_shift(const nn::Tensor& frame, int shift);

/// One random view of a [C, H, W] frame: crop-resize, circular horizontal
/// shift, brightness scale and offset.
nn::Tensor augment_view(const nn::Tensor& frame, const AugmentConfig& config, Rng& rng);

}  // namespace multissl::ssl
