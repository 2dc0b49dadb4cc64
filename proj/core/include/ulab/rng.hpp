#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <span>
#include <string_view>

namespace ulab {

/// splitmix64 finalizer. Used both to expand seeds and as the mixing step of
/// stable_hash, so that streams can be reproduced outside this code base.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Order-sensitive hash builder for seed derivation.
///
/// Every component is folded as h = splitmix64(h ^ component). Doubles enter
/// by their IEEE-754 bit pattern, strings through 64-bit FNV-1a.
class SeedHasher {
 public:
  explicit SeedHasher(std::uint64_t base) noexcept : state_(splitmix64(base)) {}

  SeedHasher& add(std::uint64_t v) noexcept;
  SeedHasher& add(double v) noexcept;
  SeedHasher& add(std::string_view s) noexcept;

  std::uint64_t value() const noexcept { return state_; }

 private:
  std::uint64_t state_;
};

/// xoshiro256** 1.0 (Blackman & Vigna), seeded by four successive splitmix64
/// outputs. Satisfies UniformRandomBitGenerator.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed) noexcept;

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() noexcept;

  /// Uniform in [0, 1) with 53 bits of resolution: (next() >> 11) * 2^-53.
  double uniform01() noexcept;
  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform01(); }
  /// Unbiased integer in [0, bound) by rejection on the top of the range.
  std::uint64_t below(std::uint64_t bound) noexcept;

  template <typename T>
  void shuffle(std::span<T> items) noexcept {
    // Fisher-Yates, highest index first.
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::array<std::uint64_t, 4> s_{};
};

}  // namespace ulab
