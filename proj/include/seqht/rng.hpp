#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace seqht {

using Rng = std::mt19937_64;

// SplitMix64 finalizer; used to derive independent sub-stream seeds.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t hash_tag(std::string_view tag) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Stream `index` of the named sub-stream `tag` under a master seed. The same
/// (seed, tag, index) triple always yields the same sequence.
inline Rng make_stream(std::uint64_t seed, std::string_view tag, std::uint64_t index) {
  const std::uint64_t s = mix64(mix64(seed ^ hash_tag(tag)) + index);
  std::seed_seq seq{static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(s >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return Rng(seq);
}

inline double uniform01(Rng& rng) { return std::generate_canonical<double, 53>(rng); }

}  // namespace seqht
