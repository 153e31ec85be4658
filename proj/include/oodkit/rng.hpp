#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace oodkit {

// All randomness in the library flows through these helpers. std::mt19937_64
// gives a standardized bit stream for a given seed; the value transforms
// below are written out explicitly because the std::*_distribution classes
// are implementation-defined and would break bit-reproducibility across
// standard libraries.

using RngEngine = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derives an independent stream seed from a base seed and stream indices.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0) {
  return splitmix64(splitmix64(splitmix64(base) ^ a) ^ b);
}

// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(RngEngine& eng) {
  return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

inline double uniform_range(RngEngine& eng, double lo, double hi) {
  return lo + uniform01(eng) * (hi - lo);
}

// Standard normal via Box-Muller; draws two uniforms per call.
inline double normal01(RngEngine& eng) {
  const double u1 = 1.0 - uniform01(eng);  // (0, 1]
  const double u2 = uniform01(eng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

// Unbiased integer in [0, n) by rejection.
inline std::uint64_t uniform_index(RngEngine& eng, std::uint64_t n) {
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = eng();
  } while (x >= limit);
  return x % n;
}

// Fisher-Yates shuffle.
template <typename T>
void shuffle(std::vector<T>& v, RngEngine& eng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(uniform_index(eng, i));
    std::swap(v[i - 1], v[j]);
  }
}

inline std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  RngEngine eng(seed);
  shuffle(idx, eng);
  return idx;
}

}  // namespace oodkit
