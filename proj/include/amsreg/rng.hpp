#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace amsreg {

// Seeded generator whose derived draws are bit-reproducible across standard
// libraries (the std distributions are implementation-defined, so only the
// raw mt19937_64 stream is used).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Standard normal (Box-Muller).
  double normal();
  // +1 or -1 with equal probability.
  int rademacher() { return (next() >> 63) ? 1 : -1; }
  // Uniform integer in [0, n).
  std::size_t below(std::size_t n);

  template <typename It>
  void shuffle(It first, It last) {
    for (auto n = static_cast<std::size_t>(last - first); n > 1; --n) {
      std::swap(first[n - 1], first[below(n)]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Independent stream seed for (seed, stream) via splitmix64 mixing.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

// Uniform draw from the unit sphere S^{n-1}.
std::vector<double> unit_sphere(Rng& rng, std::size_t n);

}  // namespace amsreg
