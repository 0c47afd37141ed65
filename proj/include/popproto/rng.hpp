#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>

namespace popproto {

using u128 = unsigned __int128;

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

/// Per-trial seed derived from a base seed and the trial index.
constexpr std::uint64_t derive_seed(std::uint64_t base_seed, std::uint64_t trial) {
  return mix64(base_seed ^ mix64(trial + 0x632be59bd9b4e019ull));
}

/// mt19937_64 with sampling routines whose output does not depend on the
/// standard library's distribution implementations, so runs reproduce
/// bit-for-bit across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform in [0, bound). bound must be positive.
  std::uint64_t below(std::uint64_t bound) {
    // Lemire's nearly-divisionless method.
    u128 m = u128(next()) * bound;
    auto low = std::uint64_t(m);
    if (low < bound) {
      std::uint64_t threshold = (0 - bound) % bound;
      while (low < threshold) {
        m = u128(next()) * bound;
        low = std::uint64_t(m);
      }
    }
    return std::uint64_t(m >> 64);
  }

  /// Uniform in [0, bound) for 128-bit bounds.
  u128 below(u128 bound) {
    if (bound <= std::numeric_limits<std::uint64_t>::max()) return below(std::uint64_t(bound));
    int bits = 128 - __builtin_clzll(std::uint64_t(bound >> 64));
    u128 mask = bits >= 128 ? ~u128(0) : ((u128(1) << bits) - 1);
    for (;;) {
      u128 v = (u128(next()) << 64 | next()) & mask;
      if (v < bound) return v;
    }
  }

  /// Uniform double in (0, 1].
  double unit_open_closed() { return (double(next() >> 11) + 1.0) * 0x1.0p-53; }

  /// Number of failures before the first success of a Bernoulli(p) sequence.
  std::uint64_t geometric_failures(double p) {
    if (p >= 1.0) return 0;
    double u = unit_open_closed();
    double g = std::floor(std::log(u) / std::log1p(-p));
    if (!(g < 1.8e19)) return std::numeric_limits<std::uint64_t>::max() / 2;
    return std::uint64_t(g);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace popproto
