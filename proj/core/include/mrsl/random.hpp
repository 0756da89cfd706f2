#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>

namespace mrsl {

/// SplitMix64 finalizer. Bijective on 64-bit words.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Derive an independent stream key from a parent seed and a stream index.
/// Used for every (fold, cell, tree, subject, replicate) so that parallel and
/// serial runs consume identical random numbers.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept;

/// Counter-based 64-bit generator: output n is mix64(key + n * golden gamma).
/// Satisfies UniformRandomBitGenerator, but all distributions used by the
/// library are implemented here so draws are identical across standard
/// library implementations.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit CounterRng(std::uint64_t key, std::uint64_t counter = 0) noexcept
      : key_(key), counter_(counter) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() noexcept;

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept;
  /// Uniform on (0, 1).
  double uniform_open() noexcept;
  /// Standard normal via Box-Muller; the second variate of a pair is cached.
  double normal() noexcept;
  /// Uniform integer in [0, n). n must be positive.
  std::size_t index(std::size_t n) noexcept;

  std::uint64_t key() const noexcept { return key_; }
  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_;
  double cached_normal_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace mrsl
