#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string_view>
#include <vector>

// Seeded randomness helpers. std::mt19937_64 has a standard-defined output
// sequence, but the std distributions do not, so every float/int draw goes
// through the hand-rolled mappings below. Identical seeds give identical
// streams on any platform.
namespace sfem::rng {

using Engine = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Stable sub-seed for a named role so independent streams never collide.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view role) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : role) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  std::uint64_t s = h ^ master;
  return splitmix64(s);
}

inline double uniform01(Engine& g) {
  return static_cast<double>(g() >> 11) * 0x1.0p-53;  // [0, 1)
}

inline double uniform(Engine& g, double lo, double hi) {
  return lo + (hi - lo) * uniform01(g);
}

// Box-Muller; one sample per call.
inline double normal(Engine& g) {
  double u1;
  do {
    u1 = uniform01(g);
  } while (u1 <= 0.0);
  const double u2 = uniform01(g);
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

// Uniform integer in [0, n), rejection-sampled to avoid modulo bias.
inline std::uint64_t below(Engine& g, std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("rng::below: n must be positive");
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = g();
  } while (x >= limit);
  return x % n;
}

// Fisher-Yates with the portable integer draw.
template <class T>
void shuffle(std::vector<T>& v, Engine& g) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[below(g, i)]);
  }
}

}  // namespace sfem::rng
