#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace tdep {

// Reproducible randomness with named substreams.
//
// Every randomized routine derives its engine as substream(seed, stream, index)
// so that results do not depend on evaluation order or thread scheduling: the
// dataset of run i and the permutations of run i come from fixed, independent
// streams no matter which worker touches them first.
//
// The engine is std::mt19937_64 (its output sequence is pinned by the
// standard). The uniform/normal/shuffle transforms below are written out
// instead of using std::*_distribution / std::shuffle, whose exact output is
// implementation-defined and would not reproduce across standard libraries.

namespace rngstream {
// Fixed stream ids. Keep stable; seeds derived from them are frozen in tests.
inline constexpr std::uint64_t dataset = 1;
inline constexpr std::uint64_t permutation = 2;
inline constexpr std::uint64_t contamination = 3;
inline constexpr std::uint64_t noise = 4;
}  // namespace rngstream

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}
}  // namespace detail

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Derive the engine seed for (seed, stream, index) through SplitMix64 so
  // that nearby seeds and stream ids give unrelated sequences.
  static Rng substream(std::uint64_t seed, std::uint64_t stream, std::uint64_t index = 0) {
    std::uint64_t s = seed;
    std::uint64_t a = detail::splitmix64(s);
    s ^= stream * 0x9e3779b97f4a7c15ull;
    std::uint64_t b = detail::splitmix64(s);
    s ^= index * 0xd1b54a32d192ed03ull;
    std::uint64_t c = detail::splitmix64(s);
    return Rng(a ^ (b + 0x165667b19e3779f9ull) ^ (c << 1));
  }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform on [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Unbiased integer in [0, n) by rejection.
  std::uint64_t uniform_index(std::uint64_t n) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t v = next_u64();
    while (v >= limit) v = next_u64();
    return v % n;
  }

  // Standard normal via Box-Muller; caches the second value.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    // u in (0,1] so the log is finite.
    double u = 1.0 - uniform();
    double v = uniform();
    double r = std::sqrt(-2.0 * std::log(u));
    double a = 6.283185307179586476925286766559 * v;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  // Fisher-Yates; written out because std::shuffle's draws are unspecified.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_index(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // Uniformly random permutation of {0,...,n-1}.
  std::vector<std::uint32_t> permutation(std::size_t n) {
    std::vector<std::uint32_t> p(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = static_cast<std::uint32_t>(i);
    shuffle(p);
    return p;
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace tdep
