#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "mjw/errors.hpp"

namespace mjw {

// SplitMix64 step; used to derive independent substream seeds from one root
// seed without correlated low bits.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t derive_stream_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t s = seed;
  std::uint64_t a = splitmix64(s);
  s ^= 0x6a09e667f3bcc909ULL + stream * 0x9e3779b97f4a7c15ULL;
  std::uint64_t b = splitmix64(s);
  return a ^ (b + (stream << 1) + 1);
}

// Deterministic random stream. All variate transforms are implemented here
// (not taken from <random> distributions) so draw sequences depend only on
// the seed, never on the standard library build.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream = 0)
      : gen_(derive_stream_seed(seed, stream)) {}

  std::uint64_t next_u64() { return gen_(); }

  // uniform on [0,1) with 53-bit resolution
  double uniform01() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  // uniform on the open interval (0,1)
  double uniform_open01() {
    double u;
    do {
      u = uniform01();
    } while (u <= 0.0);
    return u;
  }

  // uniform integer on [lo, hi] inclusive, unbiased
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    require(lo <= hi, errc::config_error, "uniform_int: empty range");
    std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    if (span == 0) return static_cast<std::int64_t>(gen_());  // full 64-bit range
    std::uint64_t limit = std::uint64_t(-1) - std::uint64_t(-1) % span;
    std::uint64_t x;
    do {
      x = gen_();
    } while (x >= limit);
    return lo + static_cast<std::int64_t>(x % span);
  }

  // standard normal via Box-Muller (no cached spare, keeps the draw sequence
  // a pure function of call order)
  double normal() {
    double u1 = uniform_open01();
    double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  // Gamma(shape, 1) via Marsaglia-Tsang; shape > 0
  double gamma(double shape) {
    require(shape > 0.0, errc::config_error, "gamma: shape must be positive");
    if (shape < 1.0) {
      double g = gamma(shape + 1.0);
      double u = uniform_open01();
      return g * std::pow(u, 1.0 / shape);
    }
    double d = shape - 1.0 / 3.0;
    double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      double u = uniform_open01();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

  // Inverse-gamma(shape, scale): scale / Gamma(shape, 1)
  double inverse_gamma(double shape, double scale) {
    return scale / gamma(shape);
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace mjw
