#pragma once

// Portable random primitives. std::mt19937_64 is fully specified by the
// standard, but the <random> distributions are not, so every variate the
// library consumes is derived here from raw 64-bit engine output. Results are
// then identical across standard library implementations.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "homnet/error.hpp"

namespace homnet {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Seed for independent stream `stream` under a master seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

// FNV-1a over the bytes, salted and finalized. Stable across platforms.
inline std::uint64_t stable_hash(std::string_view s, std::uint64_t salt) {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ salt;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return splitmix64(h);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t r;
    do {
      r = engine_();
    } while (r >= limit);
    return r % n;
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Box-Muller; the second variate is discarded to keep the stream stateless.
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  double lognormal(double mu, double sigma) { return std::exp(mu + sigma * normal()); }

 private:
  std::mt19937_64 engine_;
};

// Draws index i with probability weights[i] / sum(weights) by inverting the
// cumulative sum. Zero-weight entries are never returned.
class CumulativeSampler {
 public:
  CumulativeSampler() = default;

  explicit CumulativeSampler(std::span<const double> weights) {
    cumulative_.reserve(weights.size());
    double acc = 0.0;
    for (double w : weights) {
      if (!(w >= 0.0) || !std::isfinite(w)) {
        throw ConfigError("sampling weights must be finite and nonnegative");
      }
      acc += w;
      cumulative_.push_back(acc);
    }
    total_ = acc;
  }

  double total() const { return total_; }
  std::size_t size() const { return cumulative_.size(); }
  bool degenerate() const { return !(total_ > 0.0); }

  std::size_t draw(Rng& rng) const {
    const double x = rng.uniform() * total_;
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), x);
    if (it == cumulative_.end()) --it;  // x rounded up to total_
    // Skip trailing zero-weight entries that share the final prefix value.
    auto idx = static_cast<std::size_t>(it - cumulative_.begin());
    while (idx > 0 && cumulative_[idx] == cumulative_[idx - 1]) --idx;
    return idx;
  }

 private:
  std::vector<double> cumulative_;
  double total_ = 0.0;
};

template <typename T>
void shuffle_in_place(std::vector<T>& items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i));
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace homnet
