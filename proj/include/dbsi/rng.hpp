#pragma once

#include <cstdint>
#include <random>

namespace dbsi {

// Counter-based generator (SplitMix64): state advances by a Weyl constant and
// the output is an avalanche mix of the counter. Substreams are derived by
// remixing a seed with a stream tag, which keeps Monte-Carlo runs and the
// per-purpose streams inside one run mutually independent and makes results
// insensitive to evaluation order.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~std::uint64_t{0}; }

  result_type operator()() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
};

namespace rng {

enum class Stream : std::uint64_t {
  Channels = 1,
  ChannelNorms = 2,
  Source = 3,
  Noise = 4,
  InitEstimate = 5,
};

inline std::uint64_t mix(std::uint64_t x) {
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive(std::uint64_t seed, std::uint64_t tag) {
  return mix(seed + 0x9e3779b97f4a7c15ULL * (tag + 1));
}

inline std::uint64_t derive(std::uint64_t seed, Stream s) {
  return derive(seed, static_cast<std::uint64_t>(s));
}

inline std::uint64_t derive(std::uint64_t seed, Stream s, std::uint64_t idx) {
  return derive(derive(seed, s), idx);
}

}  // namespace rng

// Convenience wrapper bundling an engine with the two draws the simulator
// needs.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  double normal() { return normal_(eng_); }
  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(eng_);
  }

 private:
  SplitMix64 eng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace dbsi
