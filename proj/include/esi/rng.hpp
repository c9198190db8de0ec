#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace esi {

using Rng = std::mt19937_64;

// SplitMix64 finalizer. Used as a counter-based hash so that every
// (master seed, episode, iteration, stream) tuple maps to an independent
// seed without any shared generator state.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = splitmix64(base);
  for (std::uint64_t p : path) h = splitmix64(h ^ splitmix64(p + 0x632BE59BD9B4E019ULL));
  return h;
}

// Stream tags for derive_seed.
namespace stream {
inline constexpr std::uint64_t kBootstrap = 1;
inline constexpr std::uint64_t kMutation = 2;
inline constexpr std::uint64_t kPolicy = 3;
inline constexpr std::uint64_t kEnv = 4;
inline constexpr std::uint64_t kMinibatch = 5;
inline constexpr std::uint64_t kInitialSubset = 6;
}  // namespace stream

inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

}  // namespace esi
