#pragma once

// Seeded random streams. Every consumer derives its own generator from
// (seed, purpose, index) so that, e.g., network m is drawn identically no
// matter how many networks follow it or which thread draws it.

#include <cstdint>
#include <random>

namespace peerconf {

using Rng = std::mt19937_64;

enum class Stream : std::uint64_t {
  graph = 1,
  covariates = 2,
  fixed_effects = 3,
  outcomes = 4,
  replication = 5,
  starts = 6,
  bernoulli = 7,
};

// SplitMix64 finalizer applied to a running state.
constexpr std::uint64_t splitmix64(std::uint64_t& state) noexcept {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, Stream purpose,
                                    std::uint64_t index) noexcept {
  std::uint64_t s = seed;
  std::uint64_t h = splitmix64(s);
  s = h ^ static_cast<std::uint64_t>(purpose);
  h = splitmix64(s);
  s = h ^ index;
  return splitmix64(s);
}

inline Rng make_stream(std::uint64_t seed, Stream purpose, std::uint64_t index) {
  return Rng(derive_seed(seed, purpose, index));
}

// Uniform on the open interval (0, 1) from the top 53 bits of one draw.
inline double open_unit(Rng& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace peerconf
