#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace drloc::nc {

/// xoshiro256** seeded through splitmix64. Every derived quantity (bounded
/// integers, uniforms, normals) is computed with integer arithmetic or plain
/// IEEE operations, so streams are reproducible across platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  /// Independent stream for (root, tag). Used to partition a run's seed into
  /// init / data order / augmentation / pretext sampling.
  static Rng substream(std::uint64_t root, std::string_view tag);

  std::uint64_t next_u64();

  /// Uniform in [0, bound) by rejection: draws below 2^64 mod bound are
  /// discarded, the rest reduced modulo bound. No modulo bias.
  std::uint64_t uniform_int(std::uint64_t bound);

  /// Uniform in [0, 1) with 53 random bits.
  double uniform01();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Standard normal via Box-Muller; no cached second deviate.
  double normal();

 private:
  std::array<std::uint64_t, 4> s_{};
};

std::uint64_t splitmix64(std::uint64_t& state);

}  // namespace drloc::nc
