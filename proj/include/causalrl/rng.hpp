#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace causalrl {

// Every stochastic operation in the library takes an explicit Rng&.
// Reproducibility contract: identical seeds give bit-identical runs on
// one platform (std:: distributions are stable for a fixed standard
// library).
using Rng = std::mt19937_64;

// splitmix64, used to derive independent sub-stream seeds from one
// master seed without correlated low bits.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derive a named sub-stream seed, e.g. derive_seed(seed, "topology").
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view tag) {
  std::uint64_t h = master;
  for (char c : tag) h = splitmix64(h ^ static_cast<std::uint8_t>(c));
  return splitmix64(h);
}

inline Rng make_rng(std::uint64_t master, std::string_view tag) {
  return Rng(derive_seed(master, tag));
}

}  // namespace causalrl
