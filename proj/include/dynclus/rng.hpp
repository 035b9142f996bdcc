#pragma once

#include <cstdint>

namespace dynclus {

// Deterministic 64-bit generator (splitmix64). We do not use
// std::uniform_real_distribution anywhere: its output is not pinned by the
// standard, and replayable sample streams are part of the test contract.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t nextU64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0,1), 53 bits of mantissa.
  double nextDouble() { return static_cast<double>(nextU64() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n).
  std::uint64_t nextBelow(std::uint64_t n) { return n ? nextU64() % n : 0; }

 private:
  std::uint64_t state_;
};

// Stable sub-seed derivation, used to hand independent streams to guesses,
// bench rows and generator fields without coupling them to evaluation order.
inline std::uint64_t deriveSeed(std::uint64_t master, std::uint64_t stream) {
  Rng r(master ^ (0x632be59bd9b4e019ULL * (stream + 1)));
  return r.nextU64();
}

}  // namespace dynclus
