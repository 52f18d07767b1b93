#pragma once

#include <cstdint>
#include <random>

namespace cn {

// Seeded random stream. Every component that draws randomness owns one of
// these, constructed from an explicit seed, so replications and parallel
// workers stay reproducible: stream(seed) always yields the same sequence.
class RandomStream {
public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  double uniform(double lo = 0.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }

  double normal(double mean = 0.0, double sd = 1.0) {
    return std::normal_distribution<double>(mean, sd)(engine_);
  }

  double gamma(double shape) {
    return std::gamma_distribution<double>(shape, 1.0)(engine_);
  }

  // Beta(a, b) via the two-gamma construction.
  double beta(double a, double b) {
    const double x = gamma(a);
    const double y = gamma(b);
    return x / (x + y);
  }

  // Uniform integer in [0, n).
  std::size_t index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }

  std::mt19937_64& engine() { return engine_; }

private:
  std::mt19937_64 engine_;
};

// Stable derivation of child seeds (replication streams, per-chunk sampling
// streams) from a root seed. Mixes with splitmix64 so consecutive indices do
// not produce correlated mt19937 initializations.
inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t index) {
  std::uint64_t z = root + 0x9e3779b97f4a7c15ull * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace cn
