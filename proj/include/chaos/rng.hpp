#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace chaos {

/// Counter-based generator: the i-th draw of stream (seed, stream) is
/// splitmix64(seed * 0x9E3779B97F4A7C15 ^ stream * 0xD1B54A32D192ED03 + i).
/// Uniforms take the top 53 bits; normals use Box-Muller on two uniforms.
/// Every step is integer arithmetic or IEEE basic operations plus log/sqrt/cos,
/// so a (seed, stream) pair yields the same sequence on every platform that
/// honours IEEE-754 double, unlike the std:: distributions.
class CounterRng {
public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
      : key_(mix(seed * 0x9E3779B97F4A7C15ULL ^ (stream * 0xD1B54A32D192ED03ULL))) {}

  static constexpr std::uint64_t mix(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t next_u64() { return mix(key_ + counter_++); }

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  std::uint64_t counter() const { return counter_; }

private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace chaos
