#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "mjw/errors.hpp"

namespace mjw {

namespace detail {

inline double pow_q(double x, double q) {
  if (q == 1.0) return x;
  if (q == 2.0) return x * x;
  return std::pow(x, q);
}

inline double root_q(double x, double q) {
  if (x == 0.0) return 0.0;
  if (q == 1.0) return x;
  if (q == 2.0) return std::sqrt(x);
  return std::pow(x, 1.0 / q);
}

}  // namespace detail

// A probability mass function on a strictly increasing grid of real points.
// Masses are renormalized to sum to one on construction; the cumulative
// vector ends at exactly 1.0 so quantile sweeps terminate cleanly.
class DiscreteDensity {
 public:
  DiscreteDensity(std::vector<double> points, std::vector<double> masses)
      : points_(std::move(points)), masses_(std::move(masses)) {
    require(!points_.empty(), errc::empty_support, "density needs at least one point");
    require(points_.size() == masses_.size(), errc::empty_support,
            "points and masses must have equal length");
    double total = 0.0;
    for (std::size_t i = 0; i < points_.size(); ++i) {
      require(std::isfinite(points_[i]), errc::non_finite_input, "non-finite grid point");
      require(std::isfinite(masses_[i]), errc::non_finite_input, "non-finite mass");
      require(masses_[i] >= 0.0, errc::negative_mass, "mass must be nonnegative");
      if (i > 0)
        require(points_[i] > points_[i - 1], errc::non_increasing_grid,
                "grid points must be strictly increasing");
      total += masses_[i];
    }
    require(total > 0.0, errc::zero_total_mass, "masses must have positive sum");
    cum_.resize(masses_.size());
    double running = 0.0;
    for (std::size_t i = 0; i < masses_.size(); ++i) {
      masses_[i] /= total;
      running += masses_[i];
      cum_[i] = running;
    }
    cum_.back() = 1.0;
  }

  const std::vector<double>& points() const { return points_; }
  const std::vector<double>& masses() const { return masses_; }
  const std::vector<double>& cdf_steps() const { return cum_; }
  std::size_t size() const { return points_.size(); }

  // [smallest point with positive mass, largest point with positive mass]
  std::pair<double, double> support() const {
    std::size_t lo = 0;
    while (masses_[lo] == 0.0) ++lo;
    std::size_t hi = masses_.size() - 1;
    while (masses_[hi] == 0.0) --hi;
    return {points_[lo], points_[hi]};
  }

  bool operator==(const DiscreteDensity& other) const {
    return points_ == other.points_ && masses_ == other.masses_;
  }

 private:
  std::vector<double> points_;
  std::vector<double> masses_;
  std::vector<double> cum_;
};

inline DiscreteDensity make_density(std::vector<double> points, std::vector<double> masses) {
  return DiscreteDensity(std::move(points), std::move(masses));
}

inline DiscreteDensity delta(double x) { return DiscreteDensity({x}, {1.0}); }

// Generalized inverse CDF: smallest grid point x with CDF(x) >= u.
inline double quantile(const DiscreteDensity& f, double u) {
  require(u > 0.0 && u < 1.0, errc::quantile_out_of_range, "u must lie in (0,1)");
  const auto& cum = f.cdf_steps();
  auto it = std::lower_bound(cum.begin(), cum.end(), u);
  return f.points()[static_cast<std::size_t>(it - cum.begin())];
}

// q-Wasserstein distance between densities on the line, evaluated exactly by
// merging the two CDF breakpoint sets: the quantile difference is piecewise
// constant in u, so the integral is a finite sum.
inline double wasserstein(const DiscreteDensity& f, const DiscreteDensity& g, double q = 1.0) {
  require(q >= 1.0, errc::invalid_order, "wasserstein order q must be >= 1");
  const auto& pf = f.points();
  const auto& pg = g.points();
  const auto& cf = f.cdf_steps();
  const auto& cg = g.cdf_steps();

  double acc = 0.0;
  double u = 0.0;
  std::size_t i = 0, j = 0;
  while (u < 1.0) {
    const double ci = cf[i];
    const double cj = cg[j];
    const double unext = std::min(ci, cj);
    if (unext > u) acc += detail::pow_q(std::fabs(pf[i] - pg[j]), q) * (unext - u);
    if (ci == unext) ++i;
    if (cj == unext) ++j;
    u = unext;
  }
  return detail::root_q(acc, q);
}

}  // namespace mjw
