#pragma once

#include <cmath>
#include <cstdint>

namespace sundeconv {

// Counter-based generator: every value is a pure function of
// (seed, stream, counter), so draws are order-independent and streams can
// be extended without perturbing earlier ones.
namespace rng {

inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t key(std::uint64_t seed, std::uint64_t stream,
                         std::uint64_t counter) {
  return mix64(mix64(mix64(seed) ^ stream) ^ counter);
}

// Uniform in (0,1]; never exactly 0 so it is safe inside log().
inline double uniform(std::uint64_t seed, std::uint64_t stream,
                      std::uint64_t counter) {
  return (static_cast<double>(key(seed, stream, counter) >> 11) + 1.0) *
         0x1.0p-53;
}

// Standard normal via Box-Muller on counters (2c, 2c+1).
inline double gaussian(std::uint64_t seed, std::uint64_t stream,
                       std::uint64_t counter) {
  const double u1 = uniform(seed, stream, 2 * counter);
  const double u2 = uniform(seed, stream, 2 * counter + 1);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

}  // namespace rng
}  // namespace sundeconv
