#pragma once

// Counter-based random numbers. Every draw is a pure function of (key, counter), so a
// noise field can be generated by any number of threads in any order with identical results.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace vf {

/// Philox4x32 with 10 rounds (Salmon et al., "Parallel random numbers: as easy as 1, 2, 3").
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static constexpr Counter generate(Counter ctr, Key key) {
    for (int r = 0; r < 10; ++r) {
      ctr = round(ctr, key);
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  static constexpr Counter round(const Counter& c, const Key& k) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * c[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * c[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
    return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  }
};

/// SplitMix64 finalizer; used to derive independent sub-seeds.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

constexpr std::uint64_t combine_seed(std::uint64_t seed, std::uint64_t index) {
  return mix64(mix64(seed) ^ (index * 0xD6E8FEB86659FD93ull));
}

/// Uniform double in (0, 1) from 64 random bits; never returns 0 or 1.
constexpr double bits_to_open_unit(std::uint64_t bits) {
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

/// Four 32-bit words for (seed, stream, index).
constexpr Philox4x32::Counter philox_block(std::uint64_t seed, std::uint64_t index, std::uint32_t stream = 0) {
  return Philox4x32::generate({static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32), stream, 0},
                              {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)});
}

/// Standard normal variate for (seed, index) by Box-Muller on one Philox block.
inline double normal_at(std::uint64_t seed, std::uint64_t index) {
  const auto w = philox_block(seed, index);
  const double u1 = bits_to_open_unit((static_cast<std::uint64_t>(w[0]) << 32) | w[1]);
  const double u2 = bits_to_open_unit((static_cast<std::uint64_t>(w[2]) << 32) | w[3]);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

/// Sequential uniform stream over Philox; portable across standard libraries, unlike
/// std::uniform_real_distribution.
class CounterStream {
 public:
  explicit CounterStream(std::uint64_t seed, std::uint32_t stream = 1) : seed_(seed), stream_(stream) {}

  double uniform01() {
    const auto w = philox_block(seed_, next_++, stream_);
    return bits_to_open_unit((static_cast<std::uint64_t>(w[0]) << 32) | w[1]);
  }

  /// Uniform in [lo, hi]; returns lo exactly when lo == hi.
  double uniform(double lo, double hi) { return lo == hi ? lo : lo + (hi - lo) * uniform01(); }

  /// Always consumes exactly one draw.
  bool bernoulli(double p) { return uniform01() < p; }

  std::uint64_t draws() const { return next_; }

 private:
  std::uint64_t seed_;
  std::uint32_t stream_;
  std::uint64_t next_ = 0;
};

}  // namespace vf
