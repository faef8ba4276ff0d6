#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <vector>

namespace ct {

// Reproducible RNG ("ctrng-v1").
//
// Raw bits come from std::mt19937_64, whose output sequence is pinned by the
// standard, and every distribution transform is implemented here instead of
// relying on std::*_distribution (which varies across standard libraries).
// A seeded run therefore produces identical streams on any conforming
// toolchain.
//
// Components derive independent substreams with Rng::substream(seed, tag);
// tags are small integers documented at the call site (see simulation.hpp).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  static constexpr const char* kName = "ctrng-v1";

  // splitmix64 finalizer; used to decorrelate (seed, tag) pairs.
  static std::uint64_t mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  static Rng substream(std::uint64_t seed, std::uint64_t tag) {
    return Rng(mix(mix(seed) ^ (tag * 0xd6e8feb86659fd93ULL)));
  }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform double in (0, 1]; never returns 0 so log() is safe.
  double uniform01() {
    const std::uint64_t bits = next_u64() >> 11;  // 53 bits
    return (static_cast<double>(bits) + 1.0) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Standard normal via Box-Muller (cosine branch only; two uniforms per draw).
  double normal() {
    const double u1 = uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  // Gamma(shape=2, scale=1) as the sum of two unit exponentials.
  double gamma2() { return -std::log(uniform01()) - std::log(uniform01()); }

  // Dirichlet(2, 2, 2).
  std::array<double, 3> dirichlet222() {
    std::array<double, 3> g{gamma2(), gamma2(), gamma2()};
    const double s = g[0] + g[1] + g[2];
    return {g[0] / s, g[1] / s, g[2] / s};
  }

  // Uniform integer in [0, n); modulo-rejection to remove bias.
  std::uint64_t bounded(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % n;
  }

  int categorical(std::span<const double> probs) {
    const double u = uniform01();
    double cum = 0.0;
    for (std::size_t k = 0; k + 1 < probs.size(); ++k) {
      cum += probs[k];
      if (u <= cum) return static_cast<int>(k);
    }
    return static_cast<int>(probs.size()) - 1;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(bounded(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // k distinct values from 0..n-1 via partial Fisher-Yates, returned sorted.
  std::vector<int> sample_without_replacement(int n, int k) {
    std::vector<int> pool(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) pool[static_cast<std::size_t>(i)] = i;
    for (int i = 0; i < k; ++i) {
      const auto j = i + static_cast<int>(bounded(static_cast<std::uint64_t>(n - i)));
      std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
    }
    pool.resize(static_cast<std::size_t>(k));
    std::sort(pool.begin(), pool.end());
    return pool;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace ct
