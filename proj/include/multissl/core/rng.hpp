#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

namespace multissl {

/// Seeded random stream. Every consumer receives its Rng explicitly; independent
/// streams are obtained with derive(), which depends only on the seed and the
/// label, never on how much of the parent stream was consumed.
class Rng {
 public:
  explicit Rng(uint64_t seed = 0);

  uint64_t seed() const { return seed_; }
  uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n).
  int uniform_int(int n);
  double normal();
  bool coin() { return (next_u64() >> 63) != 0; }

  Rng derive(std::string_view label) const;
  Rng derive(uint64_t index) const;

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(next_u64() % i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace multissl
