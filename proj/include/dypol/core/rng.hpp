#pragma once

#include <cmath>
#include <cstdint>

namespace dypol::core {

// SplitMix64, used to expand (seed, stream) pairs into engine state.
struct SplitMix64 {
  std::uint64_t state;
  explicit SplitMix64(std::uint64_t seed) : state(seed) {}
  std::uint64_t next() {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }
};

inline std::uint64_t mix64(std::uint64_t x) { return SplitMix64(x).next(); }

// Counter-free xoshiro256** stream. Identical (seed, stream_id) pairs give
// identical draw sequences on every platform; the stdlib distributions are
// avoided for the same reason.
class SeededRng {
 public:
  SeededRng() : SeededRng(0, 0) {}
  SeededRng(std::uint64_t seed, std::uint64_t stream_id)
      : seed_(seed), stream_id_(stream_id) {
    SplitMix64 sm(seed ^ mix64(stream_id + 0x7F4A7C15ULL));
    for (auto& w : s_) w = sm.next();
    if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 1;
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[1] * 5ULL, 7) * 9ULL;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // 53-bit precision in [0, 1)
  double uniform01() { return (next_u64() >> 11) * (1.0 / 9007199254740992.0); }

  double uniform(double lo, double hi) { return lo + uniform01() * (hi - lo); }

  // Box-Muller; two uniforms per draw, no cached spare.
  double normal() {
    double u1 = uniform01();
    double u2 = uniform01();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(6.283185307179586476925286766559 * u2);
  }

  double normal(double mean, double std) { return mean + std * normal(); }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t s_[4];
};

// Stream ids are derived from a purpose tag plus an index so that every
// consumer (dynamics sampling, env noise, action sampling, ...) owns a
// disjoint stream of the one experiment seed.
inline SeededRng derive_stream(std::uint64_t seed, std::uint64_t purpose,
                               std::uint64_t index = 0) {
  return SeededRng(seed, mix64(purpose * 0x2545F4914F6CDD1DULL + index));
}

// Purpose tags used across the toolkit.
namespace streams {
inline constexpr std::uint64_t kParamInit = 1;
inline constexpr std::uint64_t kDynTrain = 2;
inline constexpr std::uint64_t kDynTest = 3;
inline constexpr std::uint64_t kEnvNoise = 4;
inline constexpr std::uint64_t kEnvReset = 5;
inline constexpr std::uint64_t kActionSample = 6;
inline constexpr std::uint64_t kOffPolicy = 7;
inline constexpr std::uint64_t kElboEps = 8;
inline constexpr std::uint64_t kSysidOrder = 9;
inline constexpr std::uint64_t kMotorPhi = 10;
inline constexpr std::uint64_t kMotorOmega = 11;
inline constexpr std::uint64_t kEval = 12;
}  // namespace streams

}  // namespace dypol::core
