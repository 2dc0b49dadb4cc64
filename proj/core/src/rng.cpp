#include "ulab/rng.hpp"

#include <bit>

namespace ulab {

SeedHasher& SeedHasher::add(std::uint64_t v) noexcept {
  state_ = splitmix64(state_ ^ v);
  return *this;
}

SeedHasher& SeedHasher::add(double v) noexcept {
  // -0.0 and 0.0 name the same grid point.
  if (v == 0.0) v = 0.0;
  return add(std::bit_cast<std::uint64_t>(v));
}

SeedHasher& SeedHasher::add(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return add(h);
}

Rng::Rng(std::uint64_t seed) noexcept {
  std::uint64_t x = seed;
  for (auto& word : s_) {
    x += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    word = z ^ (z >> 31);
  }
}

Rng::result_type Rng::operator()() noexcept {
  const std::uint64_t result = std::rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = std::rotl(s_[3], 45);
  return result;
}

double Rng::uniform01() noexcept {
  return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
}

std::uint64_t Rng::below(std::uint64_t bound) noexcept {
  if (bound <= 1) return 0;
  // Reject draws from the incomplete final block.
  const std::uint64_t limit = max() - (max() % bound + 1) % bound;
  std::uint64_t r = (*this)();
  while (r > limit) r = (*this)();
  return r % bound;
}

}  // namespace ulab
