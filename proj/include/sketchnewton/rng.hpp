#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace sketchnewton {

namespace detail {

// SplitMix64 finalizer; a bijection on 64-bit words with good avalanche.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace detail

/// Counter-based 64-bit generator: the k-th output is a keyed hash of k, so a
/// (key, counter) pair fully determines the stream. Satisfies
/// UniformRandomBitGenerator, but the helpers below are used instead of the
/// <random> distributions so that draws are identical across standard
/// library implementations.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0) noexcept
      : key_(detail::mix64(seed ^ detail::mix64(stream + 0x632be59bd9b4e019ULL))) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() noexcept {
    return detail::mix64(key_ + 0x9e3779b97f4a7c15ULL * (counter_++));
  }

  std::uint64_t counter() const noexcept { return counter_; }

  /// Uniform integer in [0, bound), bound > 0 (Lemire's multiply-shift with rejection).
  std::uint64_t uniform_index(std::uint64_t bound) noexcept {
    unsigned __int128 product = static_cast<unsigned __int128>((*this)()) * bound;
    auto low = static_cast<std::uint64_t>(product);
    if (low < bound) {
      const std::uint64_t threshold = (0 - bound) % bound;
      while (low < threshold) {
        product = static_cast<unsigned __int128>((*this)()) * bound;
        low = static_cast<std::uint64_t>(product);
      }
    }
    return static_cast<std::uint64_t>(product >> 64);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() noexcept {
    return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
  }

  /// +1 or -1 with equal probability.
  int rademacher() noexcept { return ((*this)() >> 63) != 0 ? 1 : -1; }

  /// Standard normal via Box-Muller (one value per call, the pair is not cached).
  double normal() noexcept {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// Derives an independent child seed, e.g. one per sketch draw of a solve.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept {
  return detail::mix64(detail::mix64(seed) ^ (index * 0xd1b54a32d192ed03ULL + 1));
}

}  // namespace sketchnewton
