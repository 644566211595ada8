#pragma once

#include <cmath>
#include <cstdint>

namespace cvrlab {

// splitmix64. Used for every random draw in the project so that sequences
// are identical across standard libraries and platforms
// (std::normal_distribution and friends are implementation-defined).
struct SplitMix64 {
  uint64_t state;

  explicit SplitMix64(uint64_t seed) : state(seed) {}

  uint64_t next() {
    uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // uniform in [0, 1), 53-bit resolution
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // one Box-Muller draw; the sine half is discarded
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(6.283185307179586476925287 * u2);
  }

  // modulo bias is negligible for n far below 2^64
  uint64_t below(uint64_t n) { return next() % n; }
};

inline uint64_t mix64(uint64_t x) {
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ULL;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBULL;
  x ^= x >> 31;
  return x;
}

// Independent stream per (seed, key). Record content never depends on the
// order records are generated in.
inline SplitMix64 keyed_stream(uint64_t seed, uint64_t key) {
  return SplitMix64(mix64(seed) ^
                    mix64(key * 0x9E3779B97F4A7C15ULL + 0xD1B54A32D192ED03ULL));
}

}  // namespace cvrlab
