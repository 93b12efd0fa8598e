#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace sips {

/// splitmix64 finalizer; good avalanche for combining seeds.
inline std::uint64_t mix_bits(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

/// Derives an independent stream seed from (base, stream).
inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t stream) {
  return mix_bits(base ^ mix_bits(stream + 0x632be59bd9b4e019ull));
}

/// Deterministic RNG. std::mt19937_64 has a standardized output sequence;
/// all derived draws below avoid std::*_distribution (whose output is
/// implementation-defined) so results are reproducible across platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, bound). bound must be > 0.
  std::uint32_t uniform_int(std::uint32_t bound) {
    // Modulo with rejection of the biased tail.
    const std::uint64_t limit = ~0ull - (~0ull % bound);
    std::uint64_t draw;
    do {
      draw = engine_();
    } while (draw >= limit);
    return static_cast<std::uint32_t>(draw % bound);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Standard normal via Box-Muller (polar-free, deterministic draw count
  /// per pair).
  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform01();
    double u2 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * M_PI * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace sips
