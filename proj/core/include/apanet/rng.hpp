#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace apanet {

// Seeded generator with a stream that is identical across platforms.
// The raw engine is std::mt19937_64 (its output sequence is fixed by the
// standard); the distribution transforms below are implemented by hand
// because the std:: distributions are not portable across libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed), seed_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). n must be > 0. Rejection sampling keeps
  // the result unbiased and the stream reproducible.
  std::uint64_t uniform_int(std::uint64_t n);

  int uniform_int(int lo, int hi_inclusive) {
    return lo + static_cast<int>(
                    uniform_int(static_cast<std::uint64_t>(hi_inclusive - lo) + 1));
  }

  // Standard normal via Box-Muller (one value per call, no caching, so
  // the stream stays a pure function of the call sequence).
  double normal();

  bool bernoulli(double p) { return uniform() < p; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_int(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // Child generator with a seed derived from this stream; used to give
  // subsystems independent but reproducible streams.
  Rng fork() { return Rng(next_u64()); }

 private:
  std::mt19937_64 engine_;
  std::uint64_t seed_;
};

}  // namespace apanet
