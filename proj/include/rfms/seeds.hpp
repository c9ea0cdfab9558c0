#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace rfms {

using Rng = std::mt19937_64;

/// Named seed streams derived from one experiment master seed.
enum class SeedStream : std::uint64_t {
  split = 1,
  design = 2,
  learner = 3,
  noise = 4,
  proposal = 5,
  sites = 6,
  cv = 7,
  weights = 8,
  gp = 9,
};

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives a child seed from a parent and a path of integers. Every element of
/// the path is mixed in order, so derive(s, {a, b}) != derive(s, {b, a}).
constexpr std::uint64_t derive_seed(std::uint64_t parent,
                                    std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = splitmix64(parent);
  for (auto p : path) s = splitmix64(s ^ splitmix64(p + 0x632be59bd9b4e019ULL));
  return s;
}

constexpr std::uint64_t derive_seed(std::uint64_t master, SeedStream stream,
                                    std::initializer_list<std::uint64_t> path = {}) {
  std::uint64_t s = derive_seed(master, {static_cast<std::uint64_t>(stream)});
  return path.size() == 0 ? s : derive_seed(s, path);
}

/// Uniform double in [0,1) using the top 53 bits; identical on every platform.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace rfms
