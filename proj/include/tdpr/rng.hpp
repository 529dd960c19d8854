#pragma once

#include <cstdint>

namespace tdpr {

/// Counter-based generator built on the SplitMix64 finalizer. A value is a
/// pure function of (seed, stream, counter), so any draw can be reproduced
/// without replaying earlier ones:
///
///   key   = mix(seed + G * (stream + 1))
///   value = mix(key  + G * (counter + 1)),   G = 0x9E3779B97F4A7C15
///
/// where mix is the SplitMix64 output function.
class CounterRng {
 public:
  static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

  static constexpr std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  constexpr CounterRng(std::uint64_t seed, std::uint64_t stream)
      : key_(mix(seed + kGolden * (stream + 1))) {}

  constexpr std::uint64_t at(std::uint64_t counter) const { return mix(key_ + kGolden * (counter + 1)); }

  /// Uniform in [0, 1) with 53 bits.
  constexpr double uniform(std::uint64_t counter) const {
    return static_cast<double>(at(counter) >> 11) * 0x1.0p-53;
  }

  /// Uniform integer in [lo, hi].
  constexpr std::int64_t uniform_int(std::uint64_t counter, std::int64_t lo, std::int64_t hi) const {
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<std::int64_t>(static_cast<std::uint64_t>(uniform(counter) * static_cast<double>(span)));
  }

 private:
  std::uint64_t key_;
};

}  // namespace tdpr
