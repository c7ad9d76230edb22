#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace dlab {

using Rng = std::mt19937_64;

inline constexpr std::uint64_t kDefaultSeed = 20240611;

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed for the index-th independent work item of a run seeded with `seed`.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(splitmix64(seed) ^ (index + 0x632be59bd9b4e019ULL));
}

/// Deterministic value in [0, 1) keyed by an arbitrary tuple of integers.
inline double hash_unit(std::initializer_list<std::uint64_t> keys) {
  std::uint64_t h = 0x243f6a8885a308d3ULL;
  for (auto k : keys) h = splitmix64(h ^ k);
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

/// Symmetric Dirichlet draw of the given dimension.
inline std::vector<double> dirichlet(std::size_t dim, double concentration, Rng& rng) {
  std::gamma_distribution<double> gamma(concentration, 1.0);
  std::vector<double> w(dim);
  double total = 0.0;
  for (auto& x : w) {
    x = gamma(rng);
    total += x;
  }
  if (total <= 0.0) {
    for (auto& x : w) x = 1.0 / static_cast<double>(dim);
    return w;
  }
  for (auto& x : w) x /= total;
  return w;
}

}  // namespace dlab
