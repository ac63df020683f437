#ifndef KRAMERS_RNG_HPP_
#define KRAMERS_RNG_HPP_

#include <cstdint>
#include <initializer_list>
#include <limits>
#include <random>

#include <boost/random/normal_distribution.hpp>

namespace kramers {

// SplitMix64 finalizer. Used both as a seed expander and as the mixing
// function of the counter-based stream derivation below.
constexpr std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Derives a child seed from a parent seed and a path of integer tags
// (module, chain, block, ...). The result depends only on the tuple, never on
// the order in which streams are created, so parallel chains reproduce
// independently of scheduling.
constexpr std::uint64_t derive_seed(std::uint64_t parent,
                                    std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = splitmix64(parent ^ 0x6a09e667f3bcc909ULL);
  for (std::uint64_t tag : path) {
    s = splitmix64(s ^ splitmix64(tag + 0x3c6ef372fe94f82bULL));
  }
  return s;
}

// Well-known tags for the derivation tree experiment -> module -> chain -> block.
namespace stream_tag {
inline constexpr std::uint64_t kKinetic = 1;
inline constexpr std::uint64_t kLimit = 2;
inline constexpr std::uint64_t kStart = 3;
inline constexpr std::uint64_t kProbe = 4;
inline constexpr std::uint64_t kTransport = 5;
inline constexpr std::uint64_t kBootstrap = 6;
inline constexpr std::uint64_t kIncrement = 7;
inline constexpr std::uint64_t kBaseline = 8;
inline constexpr std::uint64_t kSweep = 9;
inline constexpr std::uint64_t kStein = 10;
}  // namespace stream_tag

// xoshiro256++ (Blackman & Vigna). Satisfies UniformRandomBitGenerator so the
// standard distributions can draw from it.
class Xoshiro256pp {
 public:
  using result_type = std::uint64_t;

  explicit Xoshiro256pp(std::uint64_t seed = 0) { reseed(seed); }

  void reseed(std::uint64_t seed) {
    std::uint64_t z = seed;
    for (auto& w : s_) {
      z += 0x9e3779b97f4a7c15ULL;
      w = splitmix64(z);
    }
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }
  std::uint64_t s_[4];
};

// Engine plus a standard normal distribution (Boost's ziggurat sampler).
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  void reseed(std::uint64_t seed) {
    engine_.reseed(seed);
    normal_.reset();
  }

  double normal() { return normal_(engine_); }
  double uniform() { return engine_.uniform(); }
  Xoshiro256pp& engine() { return engine_; }

 private:
  Xoshiro256pp engine_;
  boost::random::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace kramers

#endif  // KRAMERS_RNG_HPP_
