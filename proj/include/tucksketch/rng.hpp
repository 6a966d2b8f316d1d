#pragma once

// Counter-based random numbers.
//
// Every random value in the library is a pure function of a 64-bit key and a
// 64-bit counter: bits(key, i) is the i-th output of a SplitMix64 sequence
// whose state starts at mix(key). No hidden state means maps can be
// regenerated bit-identically from their seed on any platform and in any
// order, which the sketch file format relies on.
//
// Derived quantities:
//   uniform(key, i)  = (bits >> 11) * 2^-53                 in [0, 1)
//   normal(key, i)   = Box-Muller on bits(key, 2i), bits(key, 2i+1) (cosine branch)
//   derive_seed(k,t) = mix(k + mix(t + golden))             child key for tag t

#include <cstdint>
#include <vector>

namespace tks::rng {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t bits(std::uint64_t key, std::uint64_t counter) noexcept {
  return mix64(mix64(key) + (counter + 1) * kGolden);
}

constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t tag) noexcept {
  return mix64(parent + mix64(tag + kGolden));
}

inline double uniform(std::uint64_t key, std::uint64_t counter) noexcept {
  return static_cast<double>(bits(key, counter) >> 11) * 0x1.0p-53;
}

double normal(std::uint64_t key, std::uint64_t counter) noexcept;

// Sequential view over one key, for algorithms that consume a stream
// (permutations, rejection sampling).
class Stream {
 public:
  explicit Stream(std::uint64_t key) : key_(key) {}
  std::uint64_t next() noexcept { return bits(key_, counter_++); }
  double next_uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  // Unbiased integer in [0, bound) (Lemire's multiply-and-reject).
  std::uint64_t next_below(std::uint64_t bound) noexcept;

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

// Uniformly random permutation of 0..n-1 (Fisher-Yates).
std::vector<std::int64_t> permutation(std::uint64_t key, std::int64_t n);

// First k entries of a uniformly random permutation of 0..n-1.
std::vector<std::int64_t> sample_without_replacement(std::uint64_t key, std::int64_t n, std::int64_t k);

}  // namespace tks::rng
