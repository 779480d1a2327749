#pragma once

#include "multissl/core/rng.hpp"

namespace multissl::signal {

/// A slice [t_start, t_start + length) of a parent clip of `parent_length`
/// seconds.
struct SliceSpec {
  double t_start = 0.0;
  double length = 0.0;
  double parent_length = 0.0;
};

struct SlicePair {
  SliceSpec first;
  SliceSpec second;
  /// Normalized gap |t_i - t_j| / (T_max - T) in [0, 1].
  double delta = 0.0;
};

/// delta = |t_i - t_j| / (clip_length - slice_length).
double normalized_gap(double t_i, double t_j, double clip_length, double slice_length);

/// Draws two slices of a clip. The gap is uniform on [0, T_max - T], the
/// earlier slice is placed uniformly in the room that remains, and the two
/// slices are returned in random order since the pair carries no temporal
/// order.
SlicePair slice_pair(double clip_length, double slice_length, Rng& rng);

}  // namespace multissl::signal
