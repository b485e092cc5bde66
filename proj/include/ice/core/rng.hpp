#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace ice {

// The run's single seeded random source. Distributions are derived from the
// raw mt19937_64 stream by hand because the <random> distribution classes are
// implementation-defined and would break cross-toolchain reproducibility.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform integer in [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

  // Standard normal (Box-Muller, one value per call).
  double normal();

 private:
  std::mt19937_64 engine_;
};

// FNV-1a, used to derive stable seeds from strings.
std::uint64_t fnv1a(std::string_view text);

}  // namespace ice
