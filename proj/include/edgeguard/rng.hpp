#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <string_view>

namespace edgeguard {

using Rng = std::mt19937_64;

// splitmix64 finalizer; used to fan one root seed out to per-component seeds.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Stable sub-seed for a named component ("split", "smote", "init", ...).
constexpr std::uint64_t derive_seed(std::uint64_t root, std::string_view component) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : component) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return mix64(root ^ mix64(h));
}

// Uniform draw in [0, 1) from the top 53 bits, independent of the standard
// library's distribution implementation.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform integer in [0, n) by rejection; n > 0.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

// In-place Fisher-Yates shuffle driven by uniform_index.
template <typename RandomIt>
void shuffle(RandomIt first, RandomIt last, Rng& rng) {
  const auto n = static_cast<std::uint64_t>(last - first);
  for (std::uint64_t i = n; i > 1; --i) {
    const auto j = uniform_index(rng, i);
    std::iter_swap(first + (i - 1), first + j);
  }
}

}  // namespace edgeguard
