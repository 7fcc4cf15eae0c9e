#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace lpcoreset {

/// xoshiro256** seeded through splitmix64.
///
/// Stream definition, for reproduction in other implementations:
///   state[0..3] = four successive splitmix64 outputs starting from `seed`
///     (splitmix64: x += 0x9E3779B97F4A7C15; z = x;
///      z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9;
///      z = (z ^ (z >> 27)) * 0x94D049BB133111EB; return z ^ (z >> 31))
///   next(): result = rotl(s1 * 5, 7) * 9, then the standard xoshiro256 update.
///   uniform(): (next() >> 11) * 2^-53, in [0, 1).
///   normal(): Box-Muller on two uniforms u1 (mapped to (0,1]) and u2, using
///     the cosine branch only; one normal per two uniforms.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed) noexcept {
    std::uint64_t x = seed;
    for (auto& s : state_) s = splitmix64(x);
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return ~result_type{0}; }

  result_type operator()() noexcept { return next(); }

  std::uint64_t next() noexcept {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  double uniform() noexcept {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

  double normal() noexcept {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Uniform integer in [0, bound) by rejection.
  std::uint64_t below(std::uint64_t bound) noexcept {
    const std::uint64_t limit = max() - max() % bound;
    std::uint64_t x;
    do {
      x = next();
    } while (x >= limit);
    return x % bound;
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) noexcept {
    return (x << k) | (x >> (64 - k));
  }
  static std::uint64_t splitmix64(std::uint64_t& x) noexcept {
    std::uint64_t z = (x += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t state_[4];
};

/// Seed of the i-th trial derived from a top-level seed.
inline std::uint64_t trial_seed(std::uint64_t seed, std::uint64_t i) noexcept {
  return seed + i;
}

}  // namespace lpcoreset
