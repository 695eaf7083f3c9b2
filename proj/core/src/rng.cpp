#include "apanet/rng.hpp"

#include <cmath>
#include <numbers>

namespace apanet {

std::uint64_t Rng::uniform_int(std::uint64_t n) {
  // Largest multiple of n that fits in 64 bits; reject above it.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % n;
}

double Rng::normal() {
  // Box-Muller, cosine branch only.
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace apanet
