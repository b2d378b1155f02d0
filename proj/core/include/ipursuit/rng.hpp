#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace ipursuit {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

/// All randomness flows from one root seed, split per module/purpose by tag.
inline std::uint64_t derive_seed(std::uint64_t root, std::string_view tag) {
  return splitmix64(root ^ fnv1a64(tag));
}

/// Counter-style per-cell randomness: a pure function of (seed, row, col), so
/// parallel or out-of-order generation cannot change the result.
inline std::uint64_t cell_hash(std::uint64_t seed, std::uint64_t row, std::uint64_t col) {
  return splitmix64(splitmix64(seed ^ splitmix64(row + 0x9e3779b97f4a7c15ull)) ^
                    splitmix64(col + 0x7f4a7c159e3779b9ull));
}

/// Uniform double in [0, 1) from a 64-bit hash.
inline double u64_to_unit(std::uint64_t h) {
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

/// Unbiased draw from [0, n) with explicit rejection sampling. std::shuffle and
/// std::uniform_int_distribution are implementation-defined; this is not.
inline std::uint64_t bounded_draw(std::mt19937_64& rng, std::uint64_t n) {
  if (n == 0) return 0;
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n + 1) % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x > limit);
  return x % n;
}

/// Portable Fisher-Yates shuffle of indices 0..n-1.
template <typename Index>
void seeded_shuffle(std::vector<Index>& items, std::mt19937_64& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(bounded_draw(rng, i));
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace ipursuit
