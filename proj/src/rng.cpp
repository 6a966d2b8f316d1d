#include "tucksketch/rng.hpp"

#include <cmath>
#include <numbers>
#include <numeric>

namespace tks::rng {

double normal(std::uint64_t key, std::uint64_t counter) noexcept {
  // u1 in (0, 1] so the logarithm is finite.
  const double u1 = static_cast<double>((bits(key, 2 * counter) >> 11) + 1) * 0x1.0p-53;
  const double u2 = static_cast<double>(bits(key, 2 * counter + 1) >> 11) * 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t Stream::next_below(std::uint64_t bound) noexcept {
  if (bound <= 1) return 0;
  unsigned __int128 m = static_cast<unsigned __int128>(next()) * bound;
  auto low = static_cast<std::uint64_t>(m);
  if (low < bound) {
    const std::uint64_t threshold = (0 - bound) % bound;
    while (low < threshold) {
      m = static_cast<unsigned __int128>(next()) * bound;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

std::vector<std::int64_t> sample_without_replacement(std::uint64_t key, std::int64_t n, std::int64_t k) {
  std::vector<std::int64_t> p(static_cast<std::size_t>(n));
  std::iota(p.begin(), p.end(), std::int64_t{0});
  Stream s(key);
  for (std::int64_t i = 0; i < k && i < n - 1; ++i) {
    const auto j = i + static_cast<std::int64_t>(s.next_below(static_cast<std::uint64_t>(n - i)));
    std::swap(p[static_cast<std::size_t>(i)], p[static_cast<std::size_t>(j)]);
  }
  p.resize(static_cast<std::size_t>(k));
  return p;
}

std::vector<std::int64_t> permutation(std::uint64_t key, std::int64_t n) {
  return sample_without_replacement(key, n, n);
}

}  // namespace tks::rng
