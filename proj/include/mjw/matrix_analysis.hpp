#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "mjw/errors.hpp"
#include "mjw/linalg.hpp"
#include "mjw/uncertain_sets.hpp"

namespace mjw {

// Labeled symmetric nonnegative matrix with zero diagonal.
class DistanceMatrix {
 public:
  DistanceMatrix(std::vector<std::string> labels, std::vector<double> values)
      : labels_(std::move(labels)), values_(std::move(values)) {
    n_ = labels_.size();
    require(n_ >= 1, errc::empty_collection, "distance matrix needs at least one label");
    require(values_.size() == n_ * n_, errc::config_error,
            "distance matrix values must be n*n");
    for (std::size_t i = 0; i < n_; ++i) {
      require(values_[i * n_ + i] == 0.0, errc::config_error,
              "distance matrix diagonal must be exactly zero");
      for (std::size_t j = 0; j < n_; ++j) {
        require(std::isfinite(values_[i * n_ + j]) && values_[i * n_ + j] >= 0.0,
                errc::config_error, "distance matrix entries must be finite and nonnegative");
        require(values_[i * n_ + j] == values_[j * n_ + i], errc::config_error,
                "distance matrix must be exactly symmetric");
      }
    }
  }

  std::size_t n() const { return n_; }
  const std::vector<std::string>& labels() const { return labels_; }
  double operator()(std::size_t i, std::size_t j) const { return values_[i * n_ + j]; }
  const std::vector<double>& values() const { return values_; }

  bool operator==(const DistanceMatrix& other) const {
    return labels_ == other.labels_ && values_ == other.values_;
  }

 private:
  std::vector<std::string> labels_;
  std::vector<double> values_;
  std::size_t n_ = 0;
};

// D_ij = (1/T) d_MJW^p(S_i, S_j); each unordered pair computed once.
inline DistanceMatrix distance_matrix(const std::vector<SetWithUncertainty>& sets,
                                      const std::vector<std::string>& labels, int series_length,
                                      double p = 1.0, double q = 1.0) {
  require(sets.size() >= 2, errc::empty_collection, "need at least two sets");
  require(labels.size() == sets.size(), errc::config_error, "one label per set");
  require(series_length >= 1, errc::config_error, "series length must be positive");
  const std::size_t n = sets.size();
  std::vector<double> values(n * n, 0.0);
  const double inv_t = 1.0 / static_cast<double>(series_length);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = inv_t * mj_wasserstein(sets[i], sets[j], p, q);
      values[i * n + j] = d;
      values[j * n + i] = d;
    }
  }
  return DistanceMatrix(labels, std::move(values));
}

enum class NormKind { l1, l2, op };

inline const char* norm_kind_name(NormKind k) {
  switch (k) {
    case NormKind::l1: return "l1";
    case NormKind::l2: return "l2";
    case NormKind::op: return "operator";
  }
  return "?";
}

// Size-rescaled L1/L2 entry norms and the spectral operator norm.
inline double matrix_norm(const DistanceMatrix& d, NormKind kind) {
  const std::size_t n = d.n();
  require(n >= 2, errc::too_few_series, "matrix norms need n >= 2");
  const double scale = static_cast<double>(n) * static_cast<double>(n - 1);
  switch (kind) {
    case NormKind::l1: {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) s += std::fabs(d(i, j));
      return s / scale;
    }
    case NormKind::l2: {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) s += d(i, j) * d(i, j);
      return std::sqrt(s / scale);
    }
    case NormKind::op: {
      Matrix a(n, n);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) a(i, j) = d(i, j);
      double best = 0.0;
      for (double ev : jacobi_eigenvalues(std::move(a))) best = std::max(best, std::fabs(ev));
      return best;
    }
  }
  raise(errc::config_error, "unknown norm kind");
}

enum class TriangleClass : std::uint8_t {
  blue = 0,     // ratio <= 1, triangle inequality holds
  yellow = 1,   // 1 < ratio <= 2
  red = 2,      // ratio > 2
  skipped = 3,  // degenerate: zero denominator or repeated index
};

struct TriangleTestSummary {
  std::size_t n = 0;
  std::vector<std::uint8_t> classifications;  // n^3 entries, (i*n + j)*n + k
  std::uint64_t blue = 0, yellow = 0, red = 0, skipped = 0;
  double fail_fraction = 0.0;
  std::optional<double> mean_fail_ratio;  // absent when no triple fails

  TriangleClass at(std::size_t i, std::size_t j, std::size_t k) const {
    return static_cast<TriangleClass>(classifications[(i * n + j) * n + k]);
  }
};

// Classify every ordered triple (i,j,k) of distinct indices by the ratio
// D_ik / (D_ij + D_jk); triples with a zero denominator are skipped and
// excluded from the fail-fraction denominator.
inline TriangleTestSummary triangle_test(const DistanceMatrix& d) {
  const std::size_t n = d.n();
  require(n >= 3, errc::too_few_series, "triangle test needs n >= 3");
  TriangleTestSummary out;
  out.n = n;
  out.classifications.assign(n * n * n, static_cast<std::uint8_t>(TriangleClass::skipped));
  double fail_ratio_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      for (std::size_t k = 0; k < n; ++k) {
        if (k == i || k == j) continue;
        const double denom = d(i, j) + d(j, k);
        TriangleClass cls;
        if (denom == 0.0) {
          cls = TriangleClass::skipped;
          ++out.skipped;
        } else {
          const double ratio = d(i, k) / denom;
          if (ratio <= 1.0) {
            cls = TriangleClass::blue;
            ++out.blue;
          } else if (ratio <= 2.0) {
            cls = TriangleClass::yellow;
            ++out.yellow;
            fail_ratio_sum += ratio;
          } else {
            cls = TriangleClass::red;
            ++out.red;
            fail_ratio_sum += ratio;
          }
        }
        out.classifications[(i * n + j) * n + k] = static_cast<std::uint8_t>(cls);
      }
    }
  }
  const std::uint64_t valid = out.blue + out.yellow + out.red;
  const std::uint64_t fails = out.yellow + out.red;
  out.fail_fraction = valid == 0 ? 0.0 : static_cast<double>(fails) / static_cast<double>(valid);
  if (fails > 0) out.mean_fail_ratio = fail_ratio_sum / static_cast<double>(fails);
  return out;
}

enum class Linkage { average, single, complete };

inline const char* linkage_name(Linkage l) {
  switch (l) {
    case Linkage::average: return "average";
    case Linkage::single: return "single";
    case Linkage::complete: return "complete";
  }
  return "?";
}

struct Merge {
  int left = 0;   // cluster ids: leaves are 0..n-1, merge s creates id n+s
  int right = 0;
  double height = 0.0;
};

struct Dendrogram {
  std::size_t n_leaves = 0;
  std::vector<Merge> merges;  // n-1 entries
};

// Agglomerative clustering on a precomputed dissimilarity matrix via
// Lance-Williams updates. Ties break toward the smallest cluster ids so the
// merge list is deterministic.
inline Dendrogram hierarchical_cluster(const DistanceMatrix& d, Linkage linkage = Linkage::average) {
  const std::size_t n = d.n();
  require(n >= 2, errc::too_few_series, "clustering needs n >= 2");
  const std::size_t slots = 2 * n - 1;
  std::vector<std::vector<double>> dist(slots, std::vector<double>(slots, 0.0));
  std::vector<std::size_t> size(slots, 0);
  std::vector<bool> active(slots, false);
  for (std::size_t i = 0; i < n; ++i) {
    active[i] = true;
    size[i] = 1;
    for (std::size_t j = 0; j < n; ++j) dist[i][j] = d(i, j);
  }

  Dendrogram out;
  out.n_leaves = n;
  out.merges.reserve(n - 1);
  for (std::size_t step = 0; step + 1 < n; ++step) {
    std::size_t bi = 0, bj = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < slots; ++i) {
      if (!active[i]) continue;
      for (std::size_t j = i + 1; j < slots; ++j) {
        if (!active[j]) continue;
        if (dist[i][j] < best) {
          best = dist[i][j];
          bi = i;
          bj = j;
        }
      }
    }
    const std::size_t id = n + step;
    for (std::size_t t = 0; t < slots; ++t) {
      if (!active[t] || t == bi || t == bj) continue;
      double nd;
      switch (linkage) {
        case Linkage::single: nd = std::min(dist[bi][t], dist[bj][t]); break;
        case Linkage::complete: nd = std::max(dist[bi][t], dist[bj][t]); break;
        default:
          nd = (static_cast<double>(size[bi]) * dist[bi][t] +
                static_cast<double>(size[bj]) * dist[bj][t]) /
               static_cast<double>(size[bi] + size[bj]);
      }
      dist[id][t] = nd;
      dist[t][id] = nd;
    }
    active[bi] = false;
    active[bj] = false;
    active[id] = true;
    size[id] = size[bi] + size[bj];
    out.merges.push_back({static_cast<int>(bi), static_cast<int>(bj), best});
  }
  return out;
}

}  // namespace mjw
