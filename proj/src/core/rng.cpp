#include "multissl/core/rng.hpp"

#include <cmath>
#include <numbers>

#include "multissl/core/hash.hpp"

namespace multissl {

std::string hex64(uint64_t h) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<size_t>(i)] = kDigits[h & 0xf];
    h >>= 4;
  }
  return out;
}

Rng::Rng(uint64_t seed) : seed_(seed), engine_(splitmix64(seed)) {}

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

int Rng::uniform_int(int n) {
  if (n <= 1) return 0;
  return static_cast<int>(engine_() % static_cast<uint64_t>(n));
}

double Rng::normal() {
  // Box-Muller without caching so the stream position is a pure function of
  // the call count.
  double u1 = uniform();
  double u2 = uniform();
  if (u1 < 1e-300) u1 = 1e-300;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Rng Rng::derive(std::string_view label) const {
  return Rng(splitmix64(seed_ ^ fnv1a64(label)));
}

Rng Rng::derive(uint64_t index) const {
  return Rng(splitmix64(seed_ + 0x632be59bd9b4e019ULL * (index + 1)));
}

}  // namespace multissl
