#pragma once

#include <array>
#include <cstdint>

namespace sseval {

/// SplitMix64 finalizer (Steele, Lea & Flood). Bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Random stream "sseval-rng-v1": xoshiro256** seeded by a SplitMix64 sequence.
///
/// Every draw is defined by integer arithmetic only, so sequences are
/// identical across compilers and platforms. Streams are addressed by a
/// (seed, stream) pair; the SplitMix64 start value is
///     mix64(seed) ^ mix64(stream ^ 0xD1B54A32D192ED03)
/// and the four state words are the next four SplitMix64 outputs.
/// Sampling uses stream = stratum index; replication loops use stream = rep.
class Rng {
 public:
  using result_type = std::uint64_t;
  static constexpr const char* kName = "sseval-rng-v1";

  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) noexcept;

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return ~result_type{0}; }

  result_type operator()() noexcept;

  /// Uniform integer in [0, bound), bound > 0. Lemire's multiply-shift with rejection.
  std::uint64_t below(std::uint64_t bound) noexcept;

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() noexcept;

  /// Uniform double in (0, 1).
  double uniform_open() noexcept;

  /// Standard normal via the Marsaglia polar method.
  double normal() noexcept;

  /// Gamma(shape, 1) via Marsaglia-Tsang; shape < 1 uses the boosting identity.
  double gamma(double shape) noexcept;

  double beta(double a, double b) noexcept;

 private:
  std::array<std::uint64_t, 4> s_{};
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace sseval
