#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace ferns {

// Seeded random source. Every consumer receives one explicitly; there is no
// ambient randomness anywhere in the library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Independent stream keyed by (seed, label, index). Parallel and serial
  // generation derive identical per-item streams through this.
  static Rng derive(std::uint64_t seed, std::string_view label,
                    std::uint64_t index = 0);

  // Uniform on [lo, hi).
  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }

  // Uniform on the closed integer range [lo, hi].
  int uniform_int(int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(engine_);
  }

  double normal(double mean, double stddev) {
    return std::normal_distribution<double>(mean, stddev)(engine_);
  }

  std::uint64_t next_u64() { return engine_(); }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace ferns
