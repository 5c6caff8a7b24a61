#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace nmfcpd {

// All randomness in the library flows through this generator so that results
// are bit-reproducible across platforms and thread schedules. std::<random>
// distributions are implementation-defined and are deliberately not used.

inline constexpr std::uint64_t kGolden64 = 0x9E3779B97F4A7C15ull;

/// splitmix64 finalizer (Steele, Lea, Flood 2014).
constexpr std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ull;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBull;
  z ^= z >> 31;
  return z;
}

/// Sub-seed derivation: sub_seed(parent, k) = mix64(parent + mix64(k + G))
/// where G is the 64-bit golden ratio constant. Pre-deriving every worker's
/// seed from (master, index) keeps parallel runs identical to sequential ones.
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t stream) {
  return mix64(parent + mix64(stream + kGolden64));
}

// Fixed stream ids so nested derivations never collide across pipeline stages.
namespace seed_stream {
inline constexpr std::uint64_t kRankOriginal = 0x101;
inline constexpr std::uint64_t kRankPermuted = 0x102;
inline constexpr std::uint64_t kColumnShuffle = 0x103;
inline constexpr std::uint64_t kDiscover = 0x201;
inline constexpr std::uint64_t kRefit = 0x301;
inline constexpr std::uint64_t kRefitObserved = 0x302;
inline constexpr std::uint64_t kRefitNull = 0x303;
inline constexpr std::uint64_t kRefitPermute = 0x304;
inline constexpr std::uint64_t kNetwork = 0x401;
inline constexpr std::uint64_t kScenarioLabels = 0x501;
inline constexpr std::uint64_t kScenarioNoise = 0x502;
}  // namespace seed_stream

class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    state_ += kGolden64;
    return mix64(state_);
  }

  /// Uniform on [0, 1), 53 random bits.
  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Uniform on (0, scale]; never returns zero.
  double uniform_positive(double scale) { return (1.0 - uniform01()) * scale; }

  /// Uniform integer in [0, n); rejection sampling, unbiased.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t threshold = (0 - n) % n;  // 2^64 mod n
    std::uint64_t v = next();
    while (v < threshold) v = next();
    return v % n;
  }

  /// Standard normal via Box-Muller, second deviate cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform01();  // (0, 1]
    const double u2 = uniform01();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 6.283185307179586476925286766559 * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  /// Fisher-Yates permutation of {0, ..., n-1}.
  std::vector<std::size_t> permutation(std::size_t n) {
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    for (std::size_t i = n; i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(perm[i - 1], perm[j]);
    }
    return perm;
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace nmfcpd
