#pragma once

#include <cmath>
#include <cstdint>

namespace redmoment::rng {

// splitmix64 (Vigna, public domain). The protocol contract promises
// bit-identical output streams for a given seed on any platform, so the
// generator has to be pinned here rather than taken from <random>, whose
// distributions are implementation-defined.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  static constexpr std::uint64_t min() { return 0; }
  static constexpr std::uint64_t max() { return ~0ull; }

  std::uint64_t operator()() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
};

// Counter-based derivation: stream `index` can be opened without generating
// the preceding streams, so parallel workers get independent, order-free
// seeds from one master seed.
inline std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t index) {
  SplitMix64 g(master_seed + (index + 1) * 0x9e3779b97f4a7c15ull);
  return g();
}

// Uniform in [0,1) with the full 53-bit mantissa.
inline double uniform01(SplitMix64& g) {
  return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

struct NormalPair {
  double a, b;
};

// Box-Muller, hand-rolled for the same portability reason as SplitMix64:
// std::normal_distribution does not promise a reproducible sequence.
inline NormalPair gaussian_pair(SplitMix64& g) {
  double u1;
  do {
    u1 = uniform01(g);
  } while (u1 <= 0.0);
  const double u2 = uniform01(g);
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double t = 6.283185307179586 * u2;
  return {r * std::cos(t), r * std::sin(t)};
}

}  // namespace redmoment::rng
