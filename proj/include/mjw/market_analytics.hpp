#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "mjw/errors.hpp"
#include "mjw/linalg.hpp"

namespace mjw {

struct WarningLog {
  std::vector<std::string> entries;
  void add(std::string msg) { entries.push_back(std::move(msg)); }
};

// Daily price panel: N tickers over T+1 dates. All prices positive.
struct PricePanel {
  std::vector<std::string> tickers;
  std::vector<std::string> dates;               // ISO-8601, strictly increasing
  std::vector<std::vector<double>> prices;      // tickers.size() rows, dates.size() columns

  std::size_t n_series() const { return tickers.size(); }
  std::size_t n_dates() const { return dates.size(); }

  void validate() const {
    require(!tickers.empty(), errc::empty_collection, "panel has no tickers");
    require(dates.size() >= 2, errc::series_too_short, "panel needs at least two dates");
    require(prices.size() == tickers.size(), errc::config_error, "one price row per ticker");
    for (std::size_t i = 1; i < dates.size(); ++i)
      require(dates[i] > dates[i - 1], errc::unsorted_dates, "dates must be strictly increasing");
    for (std::size_t i = 0; i < prices.size(); ++i) {
      require(prices[i].size() == dates.size(), errc::config_error,
              "price row length must match dates");
      for (double p : prices[i])
        require(std::isfinite(p) && p > 0.0, errc::non_positive_price,
                "prices must be positive, ticker " + tickers[i]);
    }
  }
};

// Log return panel: N tickers over T dates (one fewer than the price panel).
struct ReturnPanel {
  std::vector<std::string> tickers;
  std::vector<std::string> dates;           // dates[t] labels the return into date t+1
  std::vector<std::vector<double>> returns;

  std::size_t n_series() const { return tickers.size(); }
  std::size_t n_dates() const { return dates.size(); }
};

// Inclusive index window [a, b].
struct WindowSpec {
  std::size_t a = 0;
  std::size_t b = 0;
  std::size_t length() const { return b - a + 1; }
};

inline void check_window(const WindowSpec& w, std::size_t t) {
  require(w.a <= w.b && w.b < t, errc::config_error, "window indices out of range");
}

// R_i(t) = log(p_i(t) / p_i(t-1))
inline ReturnPanel log_returns(const PricePanel& panel) {
  panel.validate();
  ReturnPanel out;
  out.tickers = panel.tickers;
  out.dates.assign(panel.dates.begin() + 1, panel.dates.end());
  out.returns.resize(panel.n_series());
  for (std::size_t i = 0; i < panel.n_series(); ++i) {
    out.returns[i].resize(panel.n_dates() - 1);
    for (std::size_t t = 1; t < panel.n_dates(); ++t)
      out.returns[i][t - 1] = std::log(panel.prices[i][t] / panel.prices[i][t - 1]);
  }
  return out;
}

// Pearson correlations of the return panel over a window. A series with no
// variation inside the window gets zero off-diagonal correlation and a
// warning record instead of NaN.
inline Matrix correlation_matrix(const ReturnPanel& panel, const WindowSpec& w,
                                 WarningLog* warnings = nullptr) {
  check_window(w, panel.n_dates());
  require(w.length() >= 3, errc::window_too_short, "correlation window needs >= 3 observations");
  const std::size_t n = panel.n_series();
  require(n >= 1, errc::empty_collection, "panel has no series");
  const std::size_t len = w.length();

  std::vector<std::vector<double>> centered(n);
  std::vector<double> sxx(n, 0.0);
  std::vector<bool> degenerate(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = panel.returns[i];
    double lo = r[w.a], hi = r[w.a];
    double mean = 0.0;
    for (std::size_t t = w.a; t <= w.b; ++t) {
      mean += r[t];
      lo = std::min(lo, r[t]);
      hi = std::max(hi, r[t]);
    }
    mean /= static_cast<double>(len);
    if (lo == hi) {
      degenerate[i] = true;
      if (warnings)
        warnings->add("zero-variance series in window: " + panel.tickers[i]);
      continue;
    }
    centered[i].resize(len);
    for (std::size_t t = 0; t < len; ++t) {
      centered[i][t] = r[w.a + t] - mean;
      sxx[i] += centered[i][t] * centered[i][t];
    }
  }

  Matrix rho(n, n);
  for (std::size_t i = 0; i < n; ++i) rho(i, i) = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double value = 0.0;
      if (!degenerate[i] && !degenerate[j] && sxx[i] > 0.0 && sxx[j] > 0.0) {
        double sxy = 0.0;
        for (std::size_t t = 0; t < len; ++t) sxy += centered[i][t] * centered[j][t];
        value = sxy / std::sqrt(sxx[i] * sxx[j]);
        value = std::clamp(value, -1.0, 1.0);
      }
      rho(i, j) = value;
      rho(j, i) = value;
    }
  }
  return rho;
}

struct Histogram {
  std::vector<double> edges;        // bins+1 equal-width edges on [-1, 1]
  std::vector<std::uint64_t> counts;
};

// Histogram of the upper-triangle correlation coefficients (i < j).
inline Histogram correlation_histogram(const Matrix& rho, int bins) {
  const std::size_t n = rho.rows();
  require(n >= 2 && rho.cols() == n, errc::too_few_series,
          "correlation histogram needs an N>=2 square matrix");
  require(bins >= 1, errc::config_error, "bins must be positive");
  Histogram h;
  h.edges.resize(static_cast<std::size_t>(bins) + 1);
  for (int b = 0; b <= bins; ++b)
    h.edges[static_cast<std::size_t>(b)] = -1.0 + 2.0 * static_cast<double>(b) / bins;
  h.counts.assign(static_cast<std::size_t>(bins), 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double x = rho(i, j);
      int idx = static_cast<int>(std::floor((x + 1.0) / 2.0 * bins));
      idx = std::clamp(idx, 0, bins - 1);
      h.counts[static_cast<std::size_t>(idx)]++;
    }
  }
  return h;
}

struct PcaSpectrumPoint {
  std::size_t t = 0;            // window start index into the return dates
  std::vector<double> mu;       // leading proportions of explanatory variance
};

// Rolling eigen-spectrum of the windowed correlation matrix: eigenvalues
// sorted by magnitude and normalized by the total absolute spectrum.
inline std::vector<PcaSpectrumPoint> rolling_pca(const ReturnPanel& panel, int window = 45,
                                                 int top_k = 10, WarningLog* warnings = nullptr) {
  require(window >= 3, errc::window_too_short, "PCA window must be at least 3");
  const std::size_t t_total = panel.n_dates();
  require(t_total >= static_cast<std::size_t>(window), errc::window_too_short,
          "panel shorter than the PCA window");
  const std::size_t n = panel.n_series();
  const std::size_t keep = std::min<std::size_t>(static_cast<std::size_t>(top_k), n);

  std::vector<PcaSpectrumPoint> out;
  out.reserve(t_total - static_cast<std::size_t>(window) + 1);
  bool negative_seen = false;
  for (std::size_t t = 0; t + static_cast<std::size_t>(window) <= t_total; ++t) {
    const WindowSpec w{t, t + static_cast<std::size_t>(window) - 1};
    const Matrix rho = correlation_matrix(panel, w, warnings);
    std::vector<double> eig = jacobi_eigenvalues(rho);
    double total = 0.0;
    for (double& ev : eig) {
      if (ev < -1e-10) negative_seen = true;
      ev = std::fabs(ev);
      total += ev;
    }
    std::sort(eig.begin(), eig.end(), std::greater<double>());
    PcaSpectrumPoint point;
    point.t = t;
    point.mu.resize(keep);
    for (std::size_t i = 0; i < keep; ++i) point.mu[i] = eig[i] / total;
    out.push_back(std::move(point));
  }
  if (negative_seen && warnings)
    warnings->add("rolling PCA: negative eigenvalues encountered; magnitudes used");
  return out;
}

// g_i[a:b] = p_i[a:b] / ||p_i[a:b]||_1
inline std::vector<double> normalized_trajectory(const PricePanel& panel, std::size_t i,
                                                 const WindowSpec& w) {
  check_window(w, panel.n_dates());
  require(i < panel.n_series(), errc::config_error, "ticker index out of range");
  const auto& p = panel.prices[i];
  double total = 0.0;
  for (std::size_t t = w.a; t <= w.b; ++t) total += p[t];
  std::vector<double> g(w.length());
  for (std::size_t t = 0; t < w.length(); ++t) g[t] = p[w.a + t] / total;
  return g;
}

// D_ij = ||g_i - g_j||_1 over a window; entries lie in [0, 2].
inline Matrix trajectory_distance_matrix(const PricePanel& panel, const WindowSpec& w) {
  const std::size_t n = panel.n_series();
  std::vector<std::vector<double>> g(n);
  for (std::size_t i = 0; i < n; ++i) g[i] = normalized_trajectory(panel, i, w);
  Matrix d(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (std::size_t t = 0; t < g[i].size(); ++t) s += std::fabs(g[i][t] - g[j][t]);
      d(i, j) = s;
      d(j, i) = s;
    }
  }
  return d;
}

struct NormSeriesPoint {
  std::size_t t = 0;  // window start index into the price dates
  double value = 0.0;
};

// Frobenius norm of the rolling trajectory distance matrix.
inline std::vector<NormSeriesPoint> rolling_trajectory_norm(const PricePanel& panel,
                                                            int window = 45) {
  require(window >= 1, errc::window_too_short, "trajectory window must be positive");
  const std::size_t t_total = panel.n_dates();
  require(t_total >= static_cast<std::size_t>(window), errc::window_too_short,
          "panel shorter than the trajectory window");
  std::vector<NormSeriesPoint> out;
  out.reserve(t_total - static_cast<std::size_t>(window) + 1);
  for (std::size_t t = 0; t + static_cast<std::size_t>(window) <= t_total; ++t) {
    const WindowSpec w{t, t + static_cast<std::size_t>(window) - 1};
    const Matrix d = trajectory_distance_matrix(panel, w);
    double s = 0.0;
    for (double v : d.data()) s += v * v;
    out.push_back({t, std::sqrt(s)});
  }
  return out;
}

}  // namespace mjw
