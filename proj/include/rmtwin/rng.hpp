#pragma once

#include <cmath>
#include <cstdint>

namespace rmtwin {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace detail

// Counter-based generator: every draw is a pure function of (seed, stream,
// counter), so draws can be produced in any order, or in parallel, with
// bit-identical results. Streams separate independent uses of one seed
// (shadowing field, measurement noise, user sampling, ...).
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream)
      : base_(detail::splitmix64(seed ^ detail::splitmix64(stream ^ 0x632be59bd9b4e019ULL))) {}

  // Uniform on (0,1]; never returns 0, so log(uniform) is always finite.
  double uniform(std::uint64_t counter) const {
    const std::uint64_t bits = detail::splitmix64(base_ ^ detail::splitmix64(counter));
    return static_cast<double>((bits >> 11) + 1) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller on two sub-draws of `counter`.
  double normal(std::uint64_t counter) const {
    constexpr double two_pi = 6.283185307179586476925286766559;
    const double u1 = uniform(2 * counter);
    const double u2 = uniform(2 * counter + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
  }

  // Uniform integer in [0, n); n must be positive.
  std::uint64_t uniform_index(std::uint64_t counter, std::uint64_t n) const {
    const std::uint64_t bits = detail::splitmix64(base_ ^ detail::splitmix64(counter ^ 0x9e3779b97f4a7c15ULL));
    return bits % n;
  }

 private:
  std::uint64_t base_;
};

// Stream ids used across the artifact; fixed so outputs stay reproducible.
namespace streams {
inline constexpr std::uint64_t kShadowing = 1;
inline constexpr std::uint64_t kNoise = 2;
inline constexpr std::uint64_t kUsers = 3;
inline constexpr std::uint64_t kCompression = 4;
inline constexpr std::uint64_t kSweep = 5;
inline constexpr std::uint64_t kSmallScale = 6;
}  // namespace streams

}  // namespace rmtwin
