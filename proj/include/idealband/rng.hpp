#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace idealband {

/// Library-wide default seed for anything stochastic that the caller did not
/// seed explicitly.
inline constexpr std::uint64_t kDefaultSeed = 1729;

/// Mixes a seed into a well-spread substream key.  Used everywhere a parent
/// seed has to spawn independent child seeds deterministically.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seeded generator with hand-rolled variate mappings.  std::mt19937_64 has a
/// standard-fixed output sequence, and mapping raw words ourselves (instead of
/// going through std::*_distribution) keeps streams identical across standard
/// libraries and platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53-bit resolution.
  double uniform01() { return (engine_() >> 11) * 0x1.0p-53; }

  /// Uniform on [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Bernoulli draw: 1 with probability p.
  int bernoulli(double p) { return uniform01() < p ? 1 : 0; }

  /// Uniform index in [0, n).  Pre: n > 0.
  std::size_t index(std::size_t n) {
    return static_cast<std::size_t>(uniform01() * static_cast<double>(n));
  }

  /// In-place Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[index(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace idealband
