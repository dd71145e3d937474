#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace ptc {

// splitmix64 finalizer. All derived seeds in the project flow through this so
// that streams keyed on (seed, tag, ...) are decorrelated and reproducible.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t hash_str(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag) {
  return splitmix64(seed ^ splitmix64(tag));
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::string_view tag) {
  return mix_seed(seed, hash_str(tag));
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::string_view tag,
                              std::uint64_t a) {
  return mix_seed(mix_seed(seed, tag), a);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::string_view tag,
                              std::uint64_t a, std::uint64_t b) {
  return mix_seed(mix_seed(mix_seed(seed, tag), a), b);
}

inline std::mt19937_64 make_rng(std::uint64_t seed) {
  return std::mt19937_64(seed);
}

}  // namespace ptc
