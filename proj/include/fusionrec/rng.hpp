#pragma once

// Platform-stable random draws. The std distributions are implementation
// defined, so seeded runs would differ between standard libraries.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <utility>

namespace fusionrec {

using Rng = std::mt19937_64;

inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

/// Box-Muller, one value per call.
inline double standard_normal(Rng& rng) {
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

/// splitmix64 finaliser; derives independent stream seeds from (seed, tag).
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (tag + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Unbiased draw from [0, n).
inline std::uint64_t bounded(Rng& rng, std::uint64_t n) {
  const std::uint64_t threshold = (0 - n) % n;
  while (true) {
    const std::uint64_t r = rng();
    if (r >= threshold) return r % n;
  }
}

/// Fisher-Yates with bounded(); std::shuffle is not portable across libraries.
template <typename Vec>
void shuffle(Vec& v, Rng& rng) {
  using std::swap;
  for (std::size_t i = v.size(); i > 1; --i) swap(v[i - 1], v[bounded(rng, i)]);
}

}  // namespace fusionrec
