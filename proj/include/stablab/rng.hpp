#pragma once

#include <bit>
#include <cstdint>
#include <random>

namespace stablab {

using Engine = std::mt19937_64;

/// Purpose tags keep independent streams apart when they share
/// (master seed, s, replication index).
enum class StreamTag : std::uint32_t {
  points = 1,
  marks = 2,
  coupling = 3,
  gaussian = 4,
  palm_x = 5,
  palm_y = 6,
  palm_pilot = 7,
  probe = 8,
  shuffle = 9,
};

constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Deterministic seed for the stream keyed by (master, s, rep, tag).
/// The s component is hashed through its bit pattern so that equal
/// intensities always map to the same stream.
constexpr std::uint64_t derive_seed(std::uint64_t master, double s, std::uint64_t rep,
                                    StreamTag tag) {
  std::uint64_t h = mix64(master);
  h = mix64(h ^ std::bit_cast<std::uint64_t>(s));
  h = mix64(h ^ rep);
  h = mix64(h ^ static_cast<std::uint64_t>(tag));
  return h;
}

inline Engine make_engine(std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  return Engine(seq);
}

inline Engine make_engine(std::uint64_t master, double s, std::uint64_t rep, StreamTag tag) {
  return make_engine(derive_seed(master, s, rep, tag));
}

}  // namespace stablab
