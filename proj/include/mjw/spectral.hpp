#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "mjw/errors.hpp"
#include "mjw/linalg.hpp"

namespace mjw {

// Number of interior Fourier frequencies k = 1..floor((n-1)/2) used by the
// Whittle likelihood. DC and Nyquist are left out; the series mean then never
// enters the likelihood.
inline std::size_t n_fourier_frequencies(std::size_t n) {
  return n >= 3 ? (n - 1) / 2 : 0;
}

// Periodogram ordinates I_k = |sum_t x_t e^{-2pi i k t / n}|^2 / n at the
// interior Fourier frequencies.
inline std::vector<double> periodogram(std::span<const double> x) {
  const std::size_t n = x.size();
  const std::size_t nk = n_fourier_frequencies(n);
  std::vector<double> out(nk);
  const double base = -2.0 * 3.14159265358979323846 / static_cast<double>(n);
  for (std::size_t k = 1; k <= nk; ++k) {
    const double angle = base * static_cast<double>(k);
    const double wr = std::cos(angle), wi = std::sin(angle);
    double cr = 1.0, ci = 0.0;  // e^{-2pi i k t / n}, t = 0
    double sr = 0.0, si = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      sr += x[t] * cr;
      si += x[t] * ci;
      const double nr = cr * wr - ci * wi;
      ci = cr * wi + ci * wr;
      cr = nr;
    }
    out[k - 1] = (sr * sr + si * si) / static_cast<double>(n);
  }
  return out;
}

// Design matrix for the log spectrum on a segment of length n: an intercept
// column plus J cosine smoothing-spline basis functions evaluated at the
// interior Fourier frequencies. Row k-1 is (1, sqrt(2) cos(pi b 2k/n))_b.
inline Matrix spectral_design(std::size_t n, int n_basis) {
  const std::size_t nk = n_fourier_frequencies(n);
  Matrix x(nk, static_cast<std::size_t>(n_basis) + 1);
  const double sqrt2 = std::sqrt(2.0);
  for (std::size_t k = 1; k <= nk; ++k) {
    const double freq = 2.0 * static_cast<double>(k) / static_cast<double>(n);  // in [0,1]
    x(k - 1, 0) = 1.0;
    for (int b = 1; b <= n_basis; ++b)
      x(k - 1, static_cast<std::size_t>(b)) =
          sqrt2 * std::cos(3.14159265358979323846 * static_cast<double>(b) * freq);
  }
  return x;
}

// Whittle log likelihood given a precomputed periodogram and design matrix:
//   sum_k [ -fhat_k - I_k exp(-fhat_k) ],  fhat = X beta.
inline double log_whittle_from_periodogram(const std::vector<double>& pgram, const Matrix& design,
                                           const std::vector<double>& beta) {
  double ll = 0.0;
  const std::size_t nk = pgram.size();
  const std::size_t d = design.cols();
  for (std::size_t k = 0; k < nk; ++k) {
    double fhat = 0.0;
    for (std::size_t c = 0; c < d; ++c) fhat += design(k, c) * beta[c];
    ll += -fhat - pgram[k] * std::exp(-fhat);
  }
  return ll;
}

// Whittle log likelihood of a raw segment under log-spectrum = design * beta.
inline double log_whittle_likelihood(std::span<const double> segment,
                                     const std::vector<double>& beta, const Matrix& design) {
  const std::size_t nk = n_fourier_frequencies(segment.size());
  require(nk >= 1, errc::segment_too_short, "segment too short for a Whittle likelihood");
  require(design.rows() == nk, errc::segment_too_short,
          "design matrix rows must match the segment's Fourier frequencies");
  require(design.cols() == beta.size(), errc::config_error,
          "beta length must match design matrix columns");
  for (double v : segment)
    require(std::isfinite(v), errc::non_finite_input, "non-finite segment value");
  return log_whittle_from_periodogram(periodogram(segment), design, beta);
}

}  // namespace mjw
