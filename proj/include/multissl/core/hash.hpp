#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace multissl {

inline constexpr uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
inline constexpr uint64_t kFnvPrime = 0x100000001b3ULL;

inline uint64_t fnv1a64(std::span<const unsigned char> bytes, uint64_t h = kFnvOffset) {
  for (unsigned char b : bytes) {
    h ^= b;
    h *= kFnvPrime;
  }
  return h;
}

inline uint64_t fnv1a64(std::string_view s, uint64_t h = kFnvOffset) {
  return fnv1a64(std::span(reinterpret_cast<const unsigned char*>(s.data()), s.size()), h);
}

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// 16 lowercase hex digits.
std::string hex64(uint64_t h);

}  // namespace multissl
