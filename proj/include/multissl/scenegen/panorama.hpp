#pragma once

#include "multissl/scenegen/scene.hpp"

namespace multissl::scenegen {

/// Rotates the camera by rotation_bin * 360 / bins degrees: content at azimuth
/// theta moves to theta - rotation, i.e. a circular left shift of
/// rotation_bin * W / bins columns. The matching microphone rotation is the
/// same angle.
FrameStack rotate_panorama(const FrameStack& frames, int rotation_bin, int bins);

/// Motion proxy: per-pixel |frame[t+1] - frame[t]|, one map per consecutive
/// pair. A precomputed flow with the same shape may be used in its place.
FrameStack flow_features(const FrameStack& frames);

/// Mean of a flow stack over its pairs, a single-frame stack.
FrameStack mean_frame(const FrameStack& frames);

}  // namespace multissl::scenegen
