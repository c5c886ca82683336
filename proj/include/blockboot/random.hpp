#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace blockboot {

using RandomStream = std::mt19937_64;

/// Tags separating the independent streams owned by one replicate.
enum class StreamPurpose : std::uint64_t {
  sites = 1,
  covariates = 2,
  field = 3,
  bootstrap = 4,
  selection = 5,
  resample = 6,
  auxiliary = 7,
};

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// 64-bit FNV-1a, used to key streams by scenario name.
constexpr std::uint64_t hash_key(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Keyed counter construction: the derived seed depends only on the base seed
/// and the path components, never on how many streams were derived before.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = mix64(base ^ 0x6a09e667f3bcc909ULL);
  std::uint64_t position = 0;
  for (std::uint64_t component : path) {
    h = mix64(h ^ mix64(component + 0x9e3779b97f4a7c15ULL * ++position));
  }
  return h;
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t scenario, std::uint64_t replicate,
                                 StreamPurpose purpose) {
  return derive_seed(base, {scenario, replicate, static_cast<std::uint64_t>(purpose)});
}

inline RandomStream make_stream(std::uint64_t seed) { return RandomStream(seed); }

/// Uniform on [0, 1) with 53 random bits.
inline double uniform01(RandomStream& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double standard_normal(RandomStream& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  return normal(rng);
}

/// Uniform integer in [0, count).
inline std::size_t uniform_index(RandomStream& rng, std::size_t count) {
  std::uniform_int_distribution<std::size_t> pick(0, count - 1);
  return pick(rng);
}

}  // namespace blockboot
