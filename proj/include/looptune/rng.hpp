#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace looptune {

// splitmix64 finalizer; derives independent stream seeds from one master seed.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

// Seeded generator whose draws are identical on every platform. The std
// distributions are implementation-defined, so integer and real draws are
// derived from the raw mt19937_64 stream directly.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform in [0, n). n must be positive.
  std::size_t index(std::size_t n);

  // Uniform in [0, 1) with 53 bits of resolution.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace looptune
