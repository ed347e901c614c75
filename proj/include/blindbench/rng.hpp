#pragma once

// Seed derivation and PRNG helpers with results that do not depend on the
// standard library's distribution implementations.

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

namespace blindbench {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s,
                             std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Derives an independent stream seed from a base seed and purpose tags.
inline std::uint64_t derive_seed(std::uint64_t base,
                                 std::initializer_list<std::string_view> tags) {
  std::uint64_t h = splitmix64(base);
  for (auto tag : tags) {
    h = splitmix64(h ^ fnv1a64(tag));
    // Separator so ("ab","c") and ("a","bc") differ.
    h = splitmix64(h + 0x2f);
  }
  return h;
}

using Prng = std::mt19937_64;

/// Unbiased integer in [0, n) by rejection; n > 0.
inline std::uint64_t uniform_below(Prng& rng, std::uint64_t n) {
  const std::uint64_t threshold = (0 - n) % n;
  for (;;) {
    const std::uint64_t r = rng();
    if (r >= threshold) return r % n;
  }
}

/// Uniform double in [0, 1) from the top 53 bits.
inline double uniform_unit(Prng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Standard normal via Box-Muller (one draw per call).
inline double standard_normal(Prng& rng) {
  double u1 = uniform_unit(rng);
  while (u1 <= 0.0) u1 = uniform_unit(rng);
  const double u2 = uniform_unit(rng);
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

/// Fisher-Yates over the first `prefix` positions (whole range by default).
template <typename T>
void shuffle_prefix(std::vector<T>& items, Prng& rng,
                    std::size_t prefix = static_cast<std::size_t>(-1)) {
  const std::size_t n = items.size();
  if (prefix > n) prefix = n;
  for (std::size_t i = 0; i < prefix && i + 1 < n; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(uniform_below(rng, n - i));
    using std::swap;
    swap(items[i], items[j]);
  }
}

}  // namespace blindbench
