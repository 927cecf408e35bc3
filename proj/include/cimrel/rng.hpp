#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>

namespace cimrel {

/// SplitMix64 finalizer. Used for seeding and for deriving stream seeds.
std::uint64_t splitmix64_mix(std::uint64_t x) noexcept;

/// Seed of the independent stream number `index` under `master_seed`.
///
/// Trial i of any Monte Carlo loop uses stream_seed(master, i), so adding
/// trials never changes the draws of earlier ones.
std::uint64_t stream_seed(std::uint64_t master_seed, std::uint64_t index) noexcept;

/// xoshiro256** (Blackman & Vigna) seeded through SplitMix64, with
/// Box-Muller normals. Every operation is fully specified so the same seed
/// yields the same stream on any platform with IEEE doubles and a
/// conforming libm.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) noexcept;

  std::uint64_t next_u64() noexcept;

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() noexcept;

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) noexcept;

  /// Unbiased integer in [0, n). n must be > 0.
  std::uint64_t uniform_index(std::uint64_t n) noexcept;

  /// Standard normal via Box-Muller; the sine branch is cached for the
  /// next call.
  double normal() noexcept;

 private:
  std::array<std::uint64_t, 4> state_{};
  std::optional<double> cached_normal_;
};

}  // namespace cimrel
