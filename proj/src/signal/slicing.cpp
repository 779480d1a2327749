#include "multissl/signal/slicing.hpp"

#include <cmath>

#include "multissl/core/error.hpp"

namespace multissl::signal {

double normalized_gap(double t_i, double t_j, double clip_length, double slice_length) {
  if (!(clip_length > slice_length)) throw Error("clip too short for two distinct slices");
  return std::abs(t_i - t_j) / (clip_length - slice_length);
}

SlicePair slice_pair(double clip_length, double slice_length, Rng& rng) {
  if (!(slice_length > 0.0)) throw Error("slice length must be positive");
  if (!(clip_length > slice_length)) throw Error("clip too short for two distinct slices");
  const double room = clip_length - slice_length;
  const double gap = rng.uniform(0.0, room);
  const double t_early = rng.uniform(0.0, room - gap);
  double t_i = t_early;
  double t_j = t_early + gap;
  if (rng.coin()) std::swap(t_i, t_j);

  SlicePair p;
  p.first = {t_i, slice_length, clip_length};
  p.second = {t_j, slice_length, clip_length};
  p.delta = gap / room;
  return p;
}

}  // namespace multissl::signal
