#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

#include "dcdgd/linalg.hpp"

namespace dcdgd {

namespace detail {

inline constexpr std::uint64_t kMixMul1 = 0xbf58476d1ce4e5b9ULL;
inline constexpr std::uint64_t kMixMul2 = 0x94d049bb133111ebULL;
inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * kMixMul1;
  z = (z ^ (z >> 27)) * kMixMul2;
  return z ^ (z >> 31);
}

}  // namespace detail

/// Counter-based deterministic random stream. A stream is fully determined by
/// the key words it was derived from, so independent trials, nodes and
/// iterations can draw without sharing any state.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t state) : state_(state) {}

  /// Derives a stream from up to four key words (seed, trial, node, iteration).
  static RandomStream derive(std::uint64_t seed, std::uint64_t a = 0, std::uint64_t b = 0,
                             std::uint64_t c = 0) {
    std::uint64_t s = detail::mix64(seed + detail::kGolden);
    s = detail::mix64(s ^ (a + detail::kGolden));
    s = detail::mix64(s ^ (b + detail::kGolden));
    s = detail::mix64(s ^ (c + detail::kGolden));
    return RandomStream(s);
  }

  std::uint64_t next_u64() {
    state_ += detail::kGolden;
    return detail::mix64(state_);
  }

  /// Uniform double in [0, 1).
  double next_uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return next_uniform() < p; }

  /// Standard normal via Box-Muller; pairs are cached.
  double next_gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = next_uniform();
    double u2 = next_uniform();
    while (u1 <= 0.0) u1 = next_uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  Vec gaussian_vector(int d) {
    Vec v(d);
    for (auto& x : v) x = next_gaussian();
    return v;
  }

  /// Uniform integer in [0, n).
  std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace dcdgd
