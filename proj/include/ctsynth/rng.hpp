#pragma once

#include <cstdint>
#include <vector>

namespace ctsynth {

// SplitMix64: the single counter-based generator used for every stochastic
// operation in this project. The state advances by a fixed odd increment and
// the output is a bijective mix of the state, so draw i is a pure function of
// (seed, i). Reference: Steele, Lea & Flood, "Fast splittable pseudorandom
// number generators".
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1), 53-bit resolution.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // Uniform integer in [0, n). n must be > 0.
  std::uint64_t next_index(std::uint64_t n) { return next_u64() % n; }

  // k distinct indices from [0, n), in selection order (partial Fisher-Yates).
  std::vector<std::uint32_t> sample_distinct(std::uint32_t n, std::uint32_t k) {
    std::vector<std::uint32_t> pool(n);
    for (std::uint32_t i = 0; i < n; ++i) pool[i] = i;
    std::vector<std::uint32_t> out;
    out.reserve(k);
    for (std::uint32_t i = 0; i < k && i < n; ++i) {
      const std::uint64_t j = i + next_index(n - i);
      std::swap(pool[i], pool[j]);
      out.push_back(pool[i]);
    }
    return out;
  }

 private:
  std::uint64_t state_;
};

// Odd multiplier used to derive per-item seeds: seed_i = master ^ (i * kSeedStride).
// i = 0 reproduces the master seed.
inline constexpr std::uint64_t kSeedStride = 0x9E3779B97F4A7C15ULL;

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  return master ^ (index * kSeedStride);
}

}  // namespace ctsynth
