#pragma once

#include <cstdint>
#include <initializer_list>
#include <limits>

namespace simreg {

/// SplitMix64 finalizer. Bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Derives a child seed from a parent seed and a counter. Used for every
/// per-replication and per-draw stream so results never depend on the
/// order in which workers pick up work.
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t counter) {
  return mix64(parent ^ mix64(counter + 0x632be59bd9b4e019ULL));
}

constexpr std::uint64_t derive_seed(std::uint64_t parent,
                                    std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = parent;
  for (auto c : path) s = derive_seed(s, c);
  return s;
}

/// Stream tags keep unrelated uses of one seed apart.
namespace stream {
inline constexpr std::uint64_t data = 1;
inline constexpr std::uint64_t draws = 2;
inline constexpr std::uint64_t noise = 3;
inline constexpr std::uint64_t simulation = 4;
inline constexpr std::uint64_t tuning = 5;
inline constexpr std::uint64_t round2 = 6;
}  // namespace stream

/// Small counter-seeded generator (SplitMix64) meeting UniformRandomBitGenerator,
/// cheap enough to construct once per draw.
class DrawEngine {
 public:
  using result_type = std::uint64_t;

  explicit DrawEngine(std::uint64_t seed) : state_(seed) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
};

}  // namespace simreg
