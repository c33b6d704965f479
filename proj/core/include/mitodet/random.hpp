#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>

namespace mitodet {

/// Seeded random stream with platform-independent draws.
///
/// The standard distributions are implementation-defined, so every draw here
/// is computed from raw mt19937_64 output. Streams are derived from a root
/// seed, a text label and an index; two streams with different labels or
/// indices are statistically independent and do not depend on the order in
/// which they are created.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  static Rng derive(std::uint64_t root_seed, std::string_view label,
                    std::uint64_t index = 0);

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1).
  double uniform01();
  /// Uniform integer in [0, n). Requires n > 0.
  std::size_t uniform_index(std::size_t n);
  double normal(double mean, double stddev);
  /// Knuth's multiplication method; fine for the small means used here.
  std::size_t poisson(double mean);

 private:
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

}  // namespace mitodet
