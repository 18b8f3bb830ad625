#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace besov {

/// Counter-based SplitMix64 stream. `Rng(seed, stream)` always yields the
/// same sequence, so parallel workers that derive their stream ids from grid
/// coordinates stay deterministic regardless of scheduling.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
      : counter_(mix(seed ^ mix(stream + 0x632be59bd9b4e019ULL))) {}

  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t next_u64() {
    counter_ += 0x9e3779b97f4a7c15ULL;
    return mix(counter_);
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : next_u64() % n; }

  /// Standard normal via Box–Muller.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double rad = std::sqrt(-2.0 * std::log(u1));
    const double ang = 2.0 * std::numbers::pi * u2;
    spare_ = rad * std::sin(ang);
    has_spare_ = true;
    return rad * std::cos(ang);
  }

  /// Independent child stream.
  Rng split(std::uint64_t id) const { return Rng(counter_, id); }

 private:
  std::uint64_t counter_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace besov
