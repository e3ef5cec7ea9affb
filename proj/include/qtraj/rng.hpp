#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace qtraj {

/// Counter-based generator: every output is a stateless mix of
/// (seed, stream, counter), so parallel trajectories keyed by stream index
/// reproduce identically regardless of scheduling.
class CounterRng {
 public:
  using result_type = uint64_t;

  CounterRng(uint64_t seed, uint64_t stream) {
    key_ = mix(seed + 0x9e3779b97f4a7c15ull);
    key_ = mix(key_ ^ mix(stream + 0xbf58476d1ce4e5b9ull));
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~0ull; }

  uint64_t operator()() { return mix(key_ + 0x9e3779b97f4a7c15ull * ++counter_); }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  /// Standard normal via Box-Muller; caches the paired draw.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    double u2 = uniform();
    double radius = std::sqrt(-2.0 * std::log(u1));
    double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    have_spare_ = true;
    return radius * std::cos(angle);
  }

 private:
  static uint64_t mix(uint64_t x) {
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ull;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebull;
    x ^= x >> 31;
    return x;
  }

  uint64_t key_ = 0;
  uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace qtraj
