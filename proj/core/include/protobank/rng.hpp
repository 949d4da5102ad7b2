#pragma once

#include <cstdint>
#include <random>

namespace protobank {

// splitmix64 step (Steele et al.); used only to spread seeds, not as the
// sampling engine itself.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Decorrelated child seed for stream `salt` of a master seed. Same inputs,
// same output, everywhere.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t s = seed ^ (0x9E3779B97F4A7C15ull * (salt + 1));
  return splitmix64(s);
}

inline std::mt19937_64 make_engine(std::uint64_t seed) { return std::mt19937_64(seed); }

}  // namespace protobank
