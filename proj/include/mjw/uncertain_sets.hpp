#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "mjw/density.hpp"
#include "mjw/errors.hpp"

namespace mjw {

// A finite set of distinct reals, kept sorted.
class FiniteSet {
 public:
  explicit FiniteSet(std::vector<double> elements) : elems_(std::move(elements)) {
    require(!elems_.empty(), errc::empty_set, "finite set must be nonempty");
    for (double x : elems_)
      require(std::isfinite(x), errc::non_finite_input, "non-finite set element");
    std::sort(elems_.begin(), elems_.end());
    for (std::size_t i = 1; i < elems_.size(); ++i)
      require(elems_[i] != elems_[i - 1], errc::duplicate_point, "set elements must be distinct");
  }

  const std::vector<double>& elements() const { return elems_; }
  std::size_t size() const { return elems_.size(); }

 private:
  std::vector<double> elems_;
};

// An ordered collection of densities with pairwise disjoint supports; the
// probabilistic counterpart of a finite set, where each element's location
// varies under its own distribution.
class SetWithUncertainty {
 public:
  explicit SetWithUncertainty(std::vector<DiscreteDensity> members)
      : members_(std::move(members)) {
    require(!members_.empty(), errc::empty_set, "set with uncertainty must be nonempty");
    std::sort(members_.begin(), members_.end(),
              [](const DiscreteDensity& a, const DiscreteDensity& b) {
                return a.support().first < b.support().first;
              });
    for (std::size_t i = 1; i < members_.size(); ++i) {
      require(members_[i - 1].support().second < members_[i].support().first,
              errc::overlapping_supports, "member supports must be disjoint intervals");
    }
  }

  static SetWithUncertainty from_points(const std::vector<double>& points) {
    FiniteSet checked(points);  // sorts and rejects duplicates
    std::vector<DiscreteDensity> members;
    members.reserve(checked.size());
    for (double x : checked.elements()) members.push_back(delta(x));
    return SetWithUncertainty(std::move(members));
  }

  const std::vector<DiscreteDensity>& members() const { return members_; }
  std::size_t size() const { return members_.size(); }

 private:
  std::vector<DiscreteDensity> members_;
};

// min over s in S of |x - s|; S is sorted so the nearest neighbour brackets x.
inline double min_distance_to_set(double x, const FiniteSet& s) {
  const auto& e = s.elements();
  auto it = std::lower_bound(e.begin(), e.end(), x);
  double best = std::numeric_limits<double>::infinity();
  if (it != e.end()) best = std::min(best, std::fabs(*it - x));
  if (it != e.begin()) best = std::min(best, std::fabs(*(it - 1) - x));
  return best;
}

// min over members h of W_q(f, h)
inline double min_wasserstein_to_set(const DiscreteDensity& f, const SetWithUncertainty& s,
                                     double q = 1.0) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& h : s.members()) best = std::min(best, wasserstein(f, h, q));
  return best;
}

// Hausdorff distance: the largest of all minimal distances between the sets.
inline double hausdorff(const FiniteSet& s, const FiniteSet& t) {
  double sup = 0.0;
  for (double x : s.elements()) sup = std::max(sup, min_distance_to_set(x, t));
  for (double x : t.elements()) sup = std::max(sup, min_distance_to_set(x, s));
  return sup;
}

// MJ_p semi-metric: L^p average of minimal distances, two-sided.
inline double mj_distance(const FiniteSet& s, const FiniteSet& t, double p) {
  require(p > 0.0, errc::invalid_order, "mj order p must be positive");
  double sum_t = 0.0;
  for (double x : t.elements()) sum_t += detail::pow_q(min_distance_to_set(x, s), p);
  double sum_s = 0.0;
  for (double x : s.elements()) sum_s += detail::pow_q(min_distance_to_set(x, t), p);
  double inner = sum_t / (2.0 * static_cast<double>(t.size())) +
                 sum_s / (2.0 * static_cast<double>(s.size()));
  return detail::root_q(inner, p);
}

// MJ-Wasserstein semi-metric: MJ_p with the elementwise metric replaced by
// the q-Wasserstein distance between member densities.
inline double mj_wasserstein(const SetWithUncertainty& s, const SetWithUncertainty& t,
                             double p = 1.0, double q = 1.0) {
  require(p > 0.0, errc::invalid_order, "mj order p must be positive");
  double sum_t = 0.0;
  for (const auto& g : t.members())
    sum_t += detail::pow_q(min_wasserstein_to_set(g, s, q), p);
  double sum_s = 0.0;
  for (const auto& f : s.members())
    sum_s += detail::pow_q(min_wasserstein_to_set(f, t, q), p);
  double inner = sum_t / (2.0 * static_cast<double>(t.size())) +
                 sum_s / (2.0 * static_cast<double>(s.size()));
  return detail::root_q(inner, p);
}

}  // namespace mjw
