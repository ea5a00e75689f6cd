#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace ssda {

// Deterministic RNG. mt19937_64 output is specified bit-exactly by the
// standard; the distribution transforms below are our own so streams are
// reproducible across standard libraries (std::*_distribution is not).
class Rng {
 public:
  explicit Rng(uint64_t seed) : seed_(seed), gen_(seed) {}

  uint64_t seed() const { return seed_; }

  uint64_t next_u64() { return gen_(); }

  // Uniform in [0,1) with 53 random bits.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller; two fresh uniforms per call.
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  // Uniform integer in [0, n), rejection sampled to remove modulo bias.
  long below(long n) {
    if (n <= 1) return 0;
    uint64_t un = static_cast<uint64_t>(n);
    uint64_t limit = UINT64_MAX - UINT64_MAX % un;
    uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return static_cast<long>(x % un);
  }

  template <typename V>
  void shuffle(V& v) {
    for (long i = static_cast<long>(v.size()) - 1; i > 0; --i) {
      long j = below(i + 1);
      std::swap(v[static_cast<size_t>(i)], v[static_cast<size_t>(j)]);
    }
  }

  // Independent child stream: splitmix64 over (seed, stream id). Forking the
  // same (seed, stream) always yields the same child.
  Rng fork(uint64_t stream) const {
    uint64_t z = seed_ + (stream + 1) * 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    z = z ^ (z >> 31);
    return Rng(z);
  }

 private:
  uint64_t seed_;
  std::mt19937_64 gen_;
};

}  // namespace ssda
