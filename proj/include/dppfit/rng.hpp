#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace dppfit {

/// Deterministic random source. The generator is pinned to mt19937_64 and the
/// floating-point draws are derived from raw 64-bit words here rather than
/// through std::*_distribution, whose output is implementation-defined; a
/// given seed therefore produces the same stream on every platform.
class SeededRng {
 public:
  /// Identifier written into experiment metadata so runs can be replayed.
  static constexpr const char* kAlgorithm = "mt19937_64-v1";

  explicit SeededRng(std::uint64_t seed) : seed_(seed), gen_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform on [0, 1) with 53 random mantissa bits.
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  bool bernoulli(double p) { return uniform01() < p; }

  /// Standard normal via Box-Muller; the second value of each pair is cached.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    // 1 - uniform01() lies in (0, 1], keeping the log argument positive.
    const double u1 = 1.0 - uniform01();
    const double u2 = uniform01();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * 3.14159265358979323846 * u2;
    spare_ = radius * std::sin(angle);
    have_spare_ = true;
    return radius * std::cos(angle);
  }

  /// Independent stream derived from (seed, tag). Streams with distinct tags
  /// are independent for practical purposes, and derivation does not disturb
  /// this generator's state, so parallel and serial consumers see identical
  /// streams.
  SeededRng substream(std::uint64_t tag) const {
    return SeededRng(mix64(mix64(seed_ + 0x9E3779B97F4A7C15ull) ^
                           mix64(tag + 0xD1B54A32D192ED03ull)));
  }

 private:
  // splitmix64 finalizer.
  static std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  std::uint64_t seed_;
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace dppfit
