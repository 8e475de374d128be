#pragma once

// Counter-based random numbers. Each ensemble member draws from its own
// stream keyed by (seed, index).

#include <cmath>
#include <cstdint>
#include <numbers>

namespace eigenfolio {

inline constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Subseed for stream `index` under master `seed`.
inline constexpr std::uint64_t subseed(std::uint64_t seed, std::uint64_t index) noexcept {
  return mix64(seed ^ mix64(index + 0x9E3779B97F4A7C15ULL));
}

/// SplitMix64: output k is mix64(key + (k+1)·φ64), a pure function of the
/// key and the counter. Distribution transforms below are written out here
/// rather than taken from <random>, whose distributions are not specified
/// bit-for-bit across standard libraries.
class CounterRng {
 public:
  explicit constexpr CounterRng(std::uint64_t key) noexcept : counter_(key) {}
  CounterRng(std::uint64_t seed, std::uint64_t stream) noexcept
      : counter_(subseed(seed, stream)) {}

  constexpr std::uint64_t next() noexcept {
    counter_ += 0x9E3779B97F4A7C15ULL;
    return mix64(counter_);
  }

  /// Uniform on the open interval (0, 1).
  double uniform_open() noexcept {
    return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Uniform on [0, 1).
  double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Unbiased integer in [0, bound), bound > 0.
  std::uint64_t below(std::uint64_t bound) noexcept {
    const std::uint64_t limit = -bound % bound;  // 2^64 mod bound
    for (;;) {
      const std::uint64_t x = next();
      if (x >= limit) return x % bound;
    }
  }

  /// Standard normal via Box-Muller; the second variate of each pair is cached.
  double normal() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform_open();
    const double u2 = uniform_open();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  /// Standard Cauchy (location 0, scale 1) by inversion.
  double cauchy() noexcept { return std::tan(std::numbers::pi * (uniform_open() - 0.5)); }

 private:
  std::uint64_t counter_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace eigenfolio
