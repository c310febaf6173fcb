#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mjw/density.hpp"
#include "mjw/errors.hpp"
#include "mjw/linalg.hpp"
#include "mjw/rng.hpp"
#include "mjw/spectral.hpp"
#include "mjw/uncertain_sets.hpp"

namespace mjw {

struct SamplerConfig {
  int t_min = 40;           // minimum segment length, observations
  int max_segments = 20;    // M
  int n_iterations = 10000;
  int n_burnin = 2000;
  int n_basis = 7;          // J, cosine basis functions per segment
  double prior_scale = 1.0;         // inverse-gamma scale for tau^2
  double ig_shape = 1.0;            // inverse-gamma shape for tau^2
  double intercept_prior_var = 1e4;
  double mixture_weight = 0.2;      // pi: weight on the global relocation kernel q1
  std::uint64_t seed = 0;
  int newton_max_iter = 50;
  double newton_tol = 1e-8;

  void validate(std::size_t series_length) const {
    require(t_min >= 2, errc::config_error, "t_min must be at least 2");
    require(max_segments >= 1, errc::config_error, "max_segments must be at least 1");
    require(n_iterations > 0, errc::config_error, "n_iterations must be positive");
    require(n_burnin >= 0 && n_burnin < n_iterations, errc::config_error,
            "n_burnin must lie in [0, n_iterations)");
    require(n_basis >= 0, errc::config_error, "n_basis must be nonnegative");
    require(prior_scale > 0.0 && ig_shape > 0.0, errc::config_error,
            "tau^2 prior parameters must be positive");
    require(intercept_prior_var > 0.0, errc::config_error,
            "intercept prior variance must be positive");
    require(mixture_weight >= 0.0 && mixture_weight <= 1.0, errc::config_error,
            "mixture weight must lie in [0,1]");
    require(series_length >= 2 * static_cast<std::size_t>(t_min), errc::series_too_short,
            "series must contain at least 2*t_min observations");
  }
};

// Current position of the chain: a partition of [0,n) into m segments with a
// smoothing amplitude and spline coefficient vector per segment.
struct ChainState {
  std::vector<int> xi;                     // m+1 boundaries, xi[0]=0 < ... < xi[m]=n
  std::vector<double> tau2;                // m amplitudes
  std::vector<std::vector<double>> beta;   // m coefficient vectors, length n_basis+1
  std::vector<double> seg_loglik;          // cached Whittle log likelihood per segment

  int m() const { return static_cast<int>(xi.size()) - 1; }
  int seg_len(int j) const { return xi[j + 1] - xi[j]; }

  std::vector<int> interior_changepoints() const {
    return std::vector<int>(xi.begin() + 1, xi.end() - 1);
  }

  bool valid(int n, int t_min) const {
    if (xi.size() < 2 || xi.front() != 0 || xi.back() != n) return false;
    for (std::size_t j = 0; j + 1 < xi.size(); ++j)
      if (xi[j + 1] - xi[j] < t_min) return false;
    if (tau2.size() != static_cast<std::size_t>(m()) || beta.size() != tau2.size()) return false;
    for (double t : tau2)
      if (!(t > 0.0)) return false;
    return true;
  }
};

struct MoveStats {
  std::uint64_t attempted = 0;
  std::uint64_t accepted = 0;
  double rate() const {
    return attempted == 0 ? 0.0 : static_cast<double>(accepted) / static_cast<double>(attempted);
  }
};

struct Posterior {
  std::vector<int> sample_m;                        // retained segment counts
  std::vector<std::vector<int>> sample_changepoints;  // retained interior points
  std::vector<std::uint64_t> m_histogram;           // indexed by m, entry 0 unused
  MoveStats birth, death, within, gibbs;

  // maximally likely segment count; ties broken toward fewer segments
  int modal_m() const {
    require(!sample_m.empty(), errc::empty_posterior, "posterior holds no samples");
    int best = 0;
    std::uint64_t best_count = 0;
    for (std::size_t m = 1; m < m_histogram.size(); ++m) {
      if (m_histogram[m] > best_count) {
        best_count = m_histogram[m];
        best = static_cast<int>(m);
      }
    }
    return best;
  }
};

// --- tau^2 birth/death primitives -----------------------------------------

inline std::pair<double, double> split_tau2(double tau2, double u) {
  return {u / (1.0 - u) * tau2, (1.0 - u) / u * tau2};
}

inline double merge_tau2(double tau2_left, double tau2_right) {
  return std::sqrt(tau2_left * tau2_right);
}

// |d(tau_left^2, tau_right^2)/d(tau^2, u)| = 2 tau^2 / (u(1-u))
inline double birth_log_jacobian(double tau2, double u) {
  return std::log(2.0 * tau2 / (u * (1.0 - u)));
}

// u recovering a given split pair: split_tau2(merge_tau2(l,r), u) == (l, r)
inline double split_fraction(double tau2_left, double tau2_right) {
  double sl = std::sqrt(tau2_left), sr = std::sqrt(tau2_right);
  return sl / (sl + sr);
}

// --- segment count proposal -------------------------------------------------

// q(m_p = to | m_c = from): 1/2 up or down in the interior, forced moves at
// m=1, m=M, or when no segment can be split (m2min = 0).
inline double segment_count_proposal_prob(int to, int from, int max_segments, int m2min) {
  if (from == 1) return to == 2 ? 1.0 : 0.0;
  if (from == max_segments || m2min == 0) return to == from - 1 ? 1.0 : 0.0;
  return (to == from - 1 || to == from + 1) ? 0.5 : 0.0;
}

struct SegmentCountProposal {
  int m_p;
  double forward_prob;  // q(m_p | m_c)
  double reverse_prob;  // q(m_c | m_p), evaluated with the supplied m2min;
                        // moves re-evaluate it on the proposed partition
};

inline SegmentCountProposal propose_segment_count(int m_c, int max_segments, int m2min,
                                                  RngStream& rng) {
  require(m_c >= 1 && m_c <= max_segments, errc::config_error, "segment count out of range");
  require(max_segments >= 2, errc::config_error,
          "between-model moves need max_segments >= 2");
  int m_p;
  if (m_c == 1) {
    m_p = 2;
  } else if (m_c == max_segments || m2min == 0) {
    m_p = m_c - 1;
  } else {
    m_p = rng.uniform01() < 0.5 ? m_c - 1 : m_c + 1;
  }
  return {m_p, segment_count_proposal_prob(m_p, m_c, max_segments, m2min),
          segment_count_proposal_prob(m_c, m_p, max_segments, m2min)};
}

// --- local relocation kernel ------------------------------------------------

struct KernelPoint {
  int t;
  double prob;
};

// q2: relocation of the change point at xi_cur by at most one observation,
// restricted to moves that keep both adjacent segments at t_min or longer.
inline std::vector<KernelPoint> relocation_kernel(int xi_prev, int xi_cur, int xi_next,
                                                  int t_min) {
  const bool can_left = (xi_cur - xi_prev) > t_min;
  const bool can_right = (xi_next - xi_cur) > t_min;
  if (can_left && can_right)
    return {{xi_cur - 1, 1.0 / 3.0}, {xi_cur, 1.0 / 3.0}, {xi_cur + 1, 1.0 / 3.0}};
  if (!can_left && can_right) return {{xi_cur, 0.5}, {xi_cur + 1, 0.5}};
  if (can_left && !can_right) return {{xi_cur - 1, 0.5}, {xi_cur, 0.5}};
  return {{xi_cur, 1.0}};
}

inline double relocation_kernel_prob(int t, int xi_prev, int xi_cur, int xi_next, int t_min) {
  for (const auto& kp : relocation_kernel(xi_prev, xi_cur, xi_next, t_min))
    if (kp.t == t) return kp.prob;
  return 0.0;
}

inline int sample_kernel(const std::vector<KernelPoint>& kernel, RngStream& rng) {
  double u = rng.uniform01();
  for (const auto& kp : kernel) {
    if (u < kp.prob) return kp.t;
    u -= kp.prob;
  }
  return kernel.back().t;
}

// --- Laplace approximation for the coefficient block ------------------------

struct LaplaceFit {
  std::vector<double> mode;  // beta maximizing the conditional posterior
  Matrix chol;               // lower L with L L^T = negative Hessian at the mode
  double log_det_h = 0.0;
  bool converged = false;
};

// RJMCMC sampler over piecewise-stationary segmentations. One instance per
// series; a single chain is strictly sequential, but independent Sampler
// instances may run concurrently.
class Sampler {
 public:
  Sampler(std::vector<double> series, SamplerConfig cfg)
      : x_(std::move(series)), cfg_(cfg), n_(static_cast<int>(x_.size())) {
    cfg_.validate(x_.size());
    for (double v : x_)
      require(std::isfinite(v), errc::non_finite_input, "series contains a non-finite value");
  }

  const SamplerConfig& config() const { return cfg_; }
  int series_length() const { return n_; }

  struct MoveResult {
    bool accepted = false;
    double log_alpha = 0.0;
    int gibbs_draws = 0;
  };

  // Proposal overrides used by the reversibility tests: they pin the random
  // pieces of a move so a birth and its mirrored death can be compared at
  // identical draws.
  struct BirthForcing {
    int seg_index = 0;
    int split_point = 0;
    double u = 0.5;
    std::vector<double> beta_left, beta_right;
  };
  struct DeathForcing {
    int removal_index = 1;
    std::vector<double> beta_merged;
  };

  int count_splittable(const ChainState& s) const {
    int c = 0;
    for (int j = 0; j < s.m(); ++j)
      if (s.seg_len(j) >= 2 * cfg_.t_min) ++c;
    return c;
  }

  // Split a random splittable segment; tau^2 splits via the auxiliary u,
  // coefficients come from Laplace approximations on the two new segments.
  MoveResult birth_move(ChainState& s, RngStream& rng, const BirthForcing* force = nullptr) {
    const int m = s.m();
    std::vector<int> splittable;
    for (int j = 0; j < m; ++j)
      if (s.seg_len(j) >= 2 * cfg_.t_min) splittable.push_back(j);
    require(!splittable.empty() && m < cfg_.max_segments, errc::no_splittable_segment,
            "no segment can be split");

    const int k = force ? force->seg_index
                        : splittable[static_cast<std::size_t>(rng.uniform_int(
                              0, static_cast<std::int64_t>(splittable.size()) - 1))];
    const int lo = s.xi[k], hi = s.xi[k + 1];
    const int t =
        force ? force->split_point
              : static_cast<int>(rng.uniform_int(lo + cfg_.t_min, hi - cfg_.t_min));
    const double u = force ? force->u : rng.uniform_open01();
    const auto [tau_l, tau_r] = split_tau2(s.tau2[k], u);

    const auto pg_l = segment_periodogram(lo, t);
    const auto pg_r = segment_periodogram(t, hi);
    const auto pg_m = segment_periodogram(lo, hi);
    const Matrix& x_l = design_for_length(t - lo);
    const Matrix& x_r = design_for_length(hi - t);
    const Matrix& x_m = design_for_length(hi - lo);

    const LaplaceFit fit_l = laplace_fit(pg_l, x_l, tau_l);
    const LaplaceFit fit_r = laplace_fit(pg_r, x_r, tau_r);
    const LaplaceFit fit_m = laplace_fit(pg_m, x_m, s.tau2[k]);

    SplitConfiguration c;
    c.lo = lo;
    c.split = t;
    c.hi = hi;
    c.u = u;
    c.tau2_merged = s.tau2[k];
    c.beta_merged = s.beta[k];
    c.loglik_merged = s.seg_loglik[k];
    c.tau2_left = tau_l;
    c.tau2_right = tau_r;
    c.beta_left = force ? force->beta_left : laplace_sample(fit_l, rng);
    c.beta_right = force ? force->beta_right : laplace_sample(fit_r, rng);
    c.loglik_left = log_whittle_from_periodogram(pg_l, x_l, c.beta_left);
    c.loglik_right = log_whittle_from_periodogram(pg_r, x_r, c.beta_right);
    c.logq_beta_merged = laplace_log_density(fit_m, c.beta_merged);
    c.logq_beta_left = laplace_log_density(fit_l, c.beta_left);
    c.logq_beta_right = laplace_log_density(fit_r, c.beta_right);
    c.m_small = m;
    c.m2min_small = static_cast<int>(splittable.size());
    c.m2min_big = c.m2min_small - 1 + (t - lo >= 2 * cfg_.t_min ? 1 : 0) +
                  (hi - t >= 2 * cfg_.t_min ? 1 : 0);

    const double log_alpha = log_birth_ratio(c);
    const bool accept = std::log(rng.uniform_open01()) < log_alpha;
    if (accept) {
      s.xi.insert(s.xi.begin() + k + 1, t);
      s.tau2[k] = tau_l;
      s.tau2.insert(s.tau2.begin() + k + 1, tau_r);
      s.beta[k] = c.beta_left;
      s.beta.insert(s.beta.begin() + k + 1, c.beta_right);
      s.seg_loglik[k] = c.loglik_left;
      s.seg_loglik.insert(s.seg_loglik.begin() + k + 1, c.loglik_right);
    }
    return {accept, log_alpha};
  }

  // Remove a random interior change point; tau^2 merges to the geometric
  // mean, and the acceptance ratio is the inverse of the mirrored birth.
  MoveResult death_move(ChainState& s, RngStream& rng, const DeathForcing* force = nullptr) {
    const int m = s.m();
    require(m >= 2, errc::no_removable_changepoint, "no interior change point to remove");

    const int r = force ? force->removal_index
                        : static_cast<int>(rng.uniform_int(1, m - 1));  // remove boundary xi[r]
    const int lo = s.xi[r - 1], t = s.xi[r], hi = s.xi[r + 1];
    const double tau_merged = merge_tau2(s.tau2[r - 1], s.tau2[r]);

    const auto pg_l = segment_periodogram(lo, t);
    const auto pg_r = segment_periodogram(t, hi);
    const auto pg_m = segment_periodogram(lo, hi);
    const Matrix& x_l = design_for_length(t - lo);
    const Matrix& x_r = design_for_length(hi - t);
    const Matrix& x_m = design_for_length(hi - lo);

    const LaplaceFit fit_m = laplace_fit(pg_m, x_m, tau_merged);
    const LaplaceFit fit_l = laplace_fit(pg_l, x_l, s.tau2[r - 1]);
    const LaplaceFit fit_r = laplace_fit(pg_r, x_r, s.tau2[r]);

    SplitConfiguration c;
    c.lo = lo;
    c.split = t;
    c.hi = hi;
    c.u = split_fraction(s.tau2[r - 1], s.tau2[r]);
    c.tau2_merged = tau_merged;
    c.beta_merged = force ? force->beta_merged : laplace_sample(fit_m, rng);
    c.loglik_merged = log_whittle_from_periodogram(pg_m, x_m, c.beta_merged);
    c.tau2_left = s.tau2[r - 1];
    c.tau2_right = s.tau2[r];
    c.beta_left = s.beta[r - 1];
    c.beta_right = s.beta[r];
    c.loglik_left = s.seg_loglik[r - 1];
    c.loglik_right = s.seg_loglik[r];
    c.logq_beta_merged = laplace_log_density(fit_m, c.beta_merged);
    c.logq_beta_left = laplace_log_density(fit_l, c.beta_left);
    c.logq_beta_right = laplace_log_density(fit_r, c.beta_right);
    c.m_small = m - 1;
    c.m2min_big = count_splittable(s);
    c.m2min_small = c.m2min_big - (t - lo >= 2 * cfg_.t_min ? 1 : 0) -
                    (hi - t >= 2 * cfg_.t_min ? 1 : 0) + 1;  // merged segment is splittable

    const double log_alpha = -log_birth_ratio(c);
    const bool accept = std::log(rng.uniform_open01()) < log_alpha;
    if (accept) {
      s.xi.erase(s.xi.begin() + r);
      s.tau2[r - 1] = tau_merged;
      s.tau2.erase(s.tau2.begin() + r);
      s.beta[r - 1] = c.beta_merged;
      s.beta.erase(s.beta.begin() + r);
      s.seg_loglik[r - 1] = c.loglik_merged;
      s.seg_loglik.erase(s.seg_loglik.begin() + r);
    }
    return {accept, log_alpha};
  }

  // Relocate a change point through the q1/q2 mixture and refresh the two
  // adjacent coefficient blocks; jointly accepted. With a single segment the
  // move reduces to a coefficient refresh. The adjacent segments' tau^2 are
  // then redrawn in a Gibbs step, accepted with probability one.
  MoveResult within_move(ChainState& s, RngStream& rng) {
    const int m = s.m();
    if (m == 1) {
      const auto pg = segment_periodogram(0, n_);
      const Matrix& x = design_for_length(n_);
      const LaplaceFit fit = laplace_fit(pg, x, s.tau2[0]);
      const std::vector<double> beta_p = laplace_sample(fit, rng);
      const double ll_p = log_whittle_from_periodogram(pg, x, beta_p);
      const double log_alpha = (ll_p - s.seg_loglik[0]) +
                               (log_beta_prior(beta_p, s.tau2[0]) -
                                log_beta_prior(s.beta[0], s.tau2[0])) +
                               (laplace_log_density(fit, s.beta[0]) -
                                laplace_log_density(fit, beta_p));
      const bool accept = std::log(rng.uniform_open01()) < log_alpha;
      if (accept) {
        s.beta[0] = beta_p;
        s.seg_loglik[0] = ll_p;
      }
      gibbs_tau2(s, 0, rng);
      return {accept, log_alpha, 1};
    }

    const int r = static_cast<int>(rng.uniform_int(1, m - 1));
    const int lo = s.xi[r - 1], cur = s.xi[r], hi = s.xi[r + 1];
    const int wlo = lo + cfg_.t_min, whi = hi - cfg_.t_min;
    const double window = static_cast<double>(whi - wlo + 1);
    const double pi = cfg_.mixture_weight;

    int t;
    if (rng.uniform01() < pi) {
      t = static_cast<int>(rng.uniform_int(wlo, whi));
    } else {
      t = sample_kernel(relocation_kernel(lo, cur, hi, cfg_.t_min), rng);
    }
    const double fwd = pi / window + (1.0 - pi) * relocation_kernel_prob(t, lo, cur, hi, cfg_.t_min);
    const double rev = pi / window + (1.0 - pi) * relocation_kernel_prob(cur, lo, t, hi, cfg_.t_min);

    const auto pg_l = segment_periodogram(lo, t);
    const auto pg_r = segment_periodogram(t, hi);
    const Matrix& x_l = design_for_length(t - lo);
    const Matrix& x_r = design_for_length(hi - t);
    const LaplaceFit fit_l = laplace_fit(pg_l, x_l, s.tau2[r - 1]);
    const LaplaceFit fit_r = laplace_fit(pg_r, x_r, s.tau2[r]);
    const std::vector<double> beta_l = laplace_sample(fit_l, rng);
    const std::vector<double> beta_r = laplace_sample(fit_r, rng);
    const double ll_l = log_whittle_from_periodogram(pg_l, x_l, beta_l);
    const double ll_r = log_whittle_from_periodogram(pg_r, x_r, beta_r);

    double logq_cur_l, logq_cur_r;
    if (t == cur) {
      logq_cur_l = laplace_log_density(fit_l, s.beta[r - 1]);
      logq_cur_r = laplace_log_density(fit_r, s.beta[r]);
    } else {
      const LaplaceFit fit_cl = laplace_fit(segment_periodogram(lo, cur),
                                            design_for_length(cur - lo), s.tau2[r - 1]);
      const LaplaceFit fit_cr = laplace_fit(segment_periodogram(cur, hi),
                                            design_for_length(hi - cur), s.tau2[r]);
      logq_cur_l = laplace_log_density(fit_cl, s.beta[r - 1]);
      logq_cur_r = laplace_log_density(fit_cr, s.beta[r]);
    }

    const double log_alpha =
        (ll_l + ll_r - s.seg_loglik[r - 1] - s.seg_loglik[r]) +
        (log_beta_prior(beta_l, s.tau2[r - 1]) + log_beta_prior(beta_r, s.tau2[r]) -
         log_beta_prior(s.beta[r - 1], s.tau2[r - 1]) - log_beta_prior(s.beta[r], s.tau2[r])) +
        (logq_cur_l + logq_cur_r - laplace_log_density(fit_l, beta_l) -
         laplace_log_density(fit_r, beta_r)) +
        (std::log(rev) - std::log(fwd));

    const bool accept = std::log(rng.uniform_open01()) < log_alpha;
    if (accept) {
      s.xi[r] = t;
      s.beta[r - 1] = beta_l;
      s.beta[r] = beta_r;
      s.seg_loglik[r - 1] = ll_l;
      s.seg_loglik[r] = ll_r;
    }
    gibbs_tau2(s, r - 1, rng);
    gibbs_tau2(s, r, rng);
    return {accept, log_alpha, 2};
  }

  // Conjugate update of one segment's tau^2; always accepted.
  void gibbs_tau2(ChainState& s, int j, RngStream& rng) {
    double ssq = 0.0;
    for (int b = 1; b <= cfg_.n_basis; ++b) ssq += s.beta[j][b] * s.beta[j][b];
    const double shape = cfg_.ig_shape + 0.5 * static_cast<double>(cfg_.n_basis);
    const double scale = cfg_.prior_scale + 0.5 * ssq;
    s.tau2[j] = rng.inverse_gamma(shape, scale);
  }

  ChainState initial_state() { return make_state({0, n_}); }

  // Deterministic state on given boundaries: prior-scale tau^2 and Laplace
  // modes for the coefficients.
  ChainState make_state(const std::vector<int>& boundaries) {
    ChainState s;
    s.xi = boundaries;
    for (std::size_t j = 0; j + 1 < boundaries.size(); ++j) {
      const int lo = boundaries[j], hi = boundaries[j + 1];
      const auto pg = segment_periodogram(lo, hi);
      const Matrix& x = design_for_length(hi - lo);
      const LaplaceFit fit = laplace_fit(pg, x, cfg_.prior_scale);
      s.tau2.push_back(cfg_.prior_scale);
      s.beta.push_back(fit.mode);
      s.seg_loglik.push_back(log_whittle_from_periodogram(pg, x, fit.mode));
    }
    require(s.valid(n_, cfg_.t_min), errc::config_error, "invalid boundaries for make_state");
    return s;
  }

  // Recompute one segment's cached log likelihood (used after tests adjust a
  // state's coefficients by hand).
  double refresh_segment_loglik(ChainState& s, int j) {
    const auto pg = segment_periodogram(s.xi[j], s.xi[j + 1]);
    const Matrix& x = design_for_length(s.seg_len(j));
    s.seg_loglik[static_cast<std::size_t>(j)] =
        log_whittle_from_periodogram(pg, x, s.beta[static_cast<std::size_t>(j)]);
    return s.seg_loglik[static_cast<std::size_t>(j)];
  }

  Posterior run(RngStream& rng) {
    ChainState s = initial_state();
    Posterior post;
    post.m_histogram.assign(static_cast<std::size_t>(cfg_.max_segments) + 1, 0);
    const std::size_t retained =
        static_cast<std::size_t>(cfg_.n_iterations - cfg_.n_burnin);
    post.sample_m.reserve(retained);
    post.sample_changepoints.reserve(retained);

    for (int iter = 0; iter < cfg_.n_iterations; ++iter) {
      if (cfg_.max_segments > 1) {
        const auto prop =
            propose_segment_count(s.m(), cfg_.max_segments, count_splittable(s), rng);
        if (prop.m_p > s.m()) {
          const auto res = birth_move(s, rng);
          post.birth.attempted++;
          post.birth.accepted += res.accepted;
        } else {
          const auto res = death_move(s, rng);
          post.death.attempted++;
          post.death.accepted += res.accepted;
        }
      }
      const auto res = within_move(s, rng);
      post.within.attempted++;
      post.within.accepted += res.accepted;
      post.gibbs.attempted += res.gibbs_draws;
      post.gibbs.accepted += res.gibbs_draws;

      if (iter >= cfg_.n_burnin) {
        post.sample_m.push_back(s.m());
        post.sample_changepoints.push_back(s.interior_changepoints());
        post.m_histogram[static_cast<std::size_t>(s.m())]++;
      }
    }
    return post;
  }

  // --- numerical pieces, public for the test suite -------------------------

  std::vector<double> segment_periodogram(int lo, int hi) const {
    return periodogram(std::span<const double>(x_.data() + lo, static_cast<std::size_t>(hi - lo)));
  }

  const Matrix& design_for_length(int len) {
    auto it = design_cache_.find(len);
    if (it == design_cache_.end())
      it = design_cache_.emplace(len, spectral_design(static_cast<std::size_t>(len), cfg_.n_basis))
               .first;
    return it->second;
  }

  double log_beta_prior(const std::vector<double>& beta, double tau2) const {
    constexpr double log2pi = 1.8378770664093454835606594728112;
    double lp = -0.5 * (log2pi + std::log(cfg_.intercept_prior_var)) -
                0.5 * beta[0] * beta[0] / cfg_.intercept_prior_var;
    for (int b = 1; b <= cfg_.n_basis; ++b)
      lp += -0.5 * (log2pi + std::log(tau2)) - 0.5 * beta[b] * beta[b] / tau2;
    return lp;
  }

  double log_tau2_prior(double tau2) const {
    const double a = cfg_.ig_shape, sc = cfg_.prior_scale;
    return a * std::log(sc) - std::lgamma(a) - (a + 1.0) * std::log(tau2) - sc / tau2;
  }

  // log of the number of partitions of n into m segments of length >= t_min
  double log_partition_count(int m) const {
    const double slots = static_cast<double>(n_ - m * cfg_.t_min + m - 1);
    const double pick = static_cast<double>(m - 1);
    return std::lgamma(slots + 1.0) - std::lgamma(pick + 1.0) - std::lgamma(slots - pick + 1.0);
  }

  // Newton ascent to the mode of p(beta | segment, tau^2) with a Gaussian
  // approximation from the negative Hessian there.
  LaplaceFit laplace_fit(const std::vector<double>& pgram, const Matrix& design,
                         double tau2) const {
    const std::size_t d = design.cols();
    const std::size_t nk = pgram.size();
    require(nk >= 1, errc::segment_too_short, "segment too short for a Laplace fit");

    std::vector<double> prec(d, 1.0 / tau2);
    prec[0] = 1.0 / cfg_.intercept_prior_var;

    std::vector<double> beta(d, 0.0);
    double mean_i = 0.0;
    for (double v : pgram) mean_i += v;
    mean_i /= static_cast<double>(nk);
    beta[0] = std::log(std::max(mean_i, 1e-300));

    auto objective = [&](const std::vector<double>& b) {
      double obj = log_whittle_from_periodogram(pgram, design, b);
      for (std::size_t c = 0; c < d; ++c) obj -= 0.5 * prec[c] * b[c] * b[c];
      return obj;
    };

    std::vector<double> grad(d), fhat(nk), cand(d);
    Matrix negh(d, d);
    auto fill_grad_hessian = [&](const std::vector<double>& b) {
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) negh(i, j) = 0.0;
      for (std::size_t k = 0; k < nk; ++k) {
        double f = 0.0;
        for (std::size_t c = 0; c < d; ++c) f += design(k, c) * b[c];
        const double w = pgram[k] * std::exp(std::min(-f, 500.0));
        for (std::size_t c = 0; c < d; ++c) grad[c] += (w - 1.0) * design(k, c);
        for (std::size_t i = 0; i < d; ++i)
          for (std::size_t j = i; j < d; ++j) negh(i, j) += w * design(k, i) * design(k, j);
      }
      for (std::size_t c = 0; c < d; ++c) {
        grad[c] -= prec[c] * b[c];
        negh(c, c) += prec[c];
      }
      for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < i; ++j) negh(i, j) = negh(j, i);
    };

    double f_cur = objective(beta);
    bool converged = false;
    for (int it = 0; it < cfg_.newton_max_iter; ++it) {
      fill_grad_hessian(beta);
      double gmax = 0.0;
      for (double g : grad) gmax = std::max(gmax, std::fabs(g));
      if (gmax < cfg_.newton_tol) {
        converged = true;
        break;
      }
      const Matrix l = cholesky(negh);
      const std::vector<double> step = cholesky_solve(l, grad);
      double scale = 1.0;
      bool improved = false;
      for (int half = 0; half < 50; ++half) {
        for (std::size_t c = 0; c < d; ++c) cand[c] = beta[c] + scale * step[c];
        const double f_new = objective(cand);
        if (f_new > f_cur || (half == 0 && f_new == f_cur)) {
          beta = cand;
          f_cur = f_new;
          improved = true;
          break;
        }
        scale *= 0.5;
      }
      if (!improved) break;  // at a flat spot; treat as converged
    }

    fill_grad_hessian(beta);
    LaplaceFit fit;
    fit.mode = beta;
    fit.chol = cholesky(negh);
    fit.log_det_h = cholesky_log_det(fit.chol);
    fit.converged = converged;
    return fit;
  }

  std::vector<double> laplace_sample(const LaplaceFit& fit, RngStream& rng) const {
    const std::size_t d = fit.mode.size();
    std::vector<double> z(d);
    for (std::size_t i = 0; i < d; ++i) z[i] = rng.normal();
    const std::vector<double> y = backward_solve(fit.chol, z);  // cov = H^{-1}
    std::vector<double> out(d);
    for (std::size_t i = 0; i < d; ++i) out[i] = fit.mode[i] + y[i];
    return out;
  }

  double laplace_log_density(const LaplaceFit& fit, const std::vector<double>& beta) const {
    constexpr double log2pi = 1.8378770664093454835606594728112;
    const std::size_t d = fit.mode.size();
    std::vector<double> v(d);
    for (std::size_t i = 0; i < d; ++i) v[i] = beta[i] - fit.mode[i];
    double quad = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      double s = 0.0;
      for (std::size_t k = i; k < d; ++k) s += fit.chol(k, i) * v[k];
      quad += s * s;
    }
    return -0.5 * static_cast<double>(d) * log2pi + 0.5 * fit.log_det_h - 0.5 * quad;
  }

 private:
  // Everything the acceptance ratio of a birth needs; the death ratio is its
  // negation at the mirrored configuration.
  struct SplitConfiguration {
    int lo = 0, split = 0, hi = 0;
    double u = 0.5;
    double tau2_merged = 1.0, tau2_left = 1.0, tau2_right = 1.0;
    std::vector<double> beta_merged, beta_left, beta_right;
    double loglik_merged = 0.0, loglik_left = 0.0, loglik_right = 0.0;
    double logq_beta_merged = 0.0, logq_beta_left = 0.0, logq_beta_right = 0.0;
    int m_small = 1;       // segment count of the merged state
    int m2min_small = 0;   // splittable segments in the merged state
    int m2min_big = 0;     // splittable segments in the split state
  };

  double log_birth_ratio(const SplitConfiguration& c) const {
    const double loglik = c.loglik_left + c.loglik_right - c.loglik_merged;
    const double prior_xi = log_partition_count(c.m_small) - log_partition_count(c.m_small + 1);
    const double prior_tau = log_tau2_prior(c.tau2_left) + log_tau2_prior(c.tau2_right) -
                             log_tau2_prior(c.tau2_merged);
    const double prior_beta = log_beta_prior(c.beta_left, c.tau2_left) +
                              log_beta_prior(c.beta_right, c.tau2_right) -
                              log_beta_prior(c.beta_merged, c.tau2_merged);
    const double prop_m =
        std::log(segment_count_proposal_prob(c.m_small, c.m_small + 1, cfg_.max_segments,
                                             c.m2min_big)) -
        std::log(segment_count_proposal_prob(c.m_small + 1, c.m_small, cfg_.max_segments,
                                             c.m2min_small));
    const int split_positions = (c.hi - c.lo) - 2 * cfg_.t_min + 1;
    const double prop_xi =
        -std::log(static_cast<double>(c.m_small)) +
        std::log(static_cast<double>(c.m2min_small) * static_cast<double>(split_positions));
    const double prop_beta = c.logq_beta_merged - c.logq_beta_left - c.logq_beta_right;
    const double jac = birth_log_jacobian(c.tau2_merged, c.u);
    return loglik + prior_xi + prior_tau + prior_beta + prop_m + prop_xi + prop_beta + jac;
  }

  std::vector<double> x_;
  SamplerConfig cfg_;
  int n_;
  std::unordered_map<int, Matrix> design_cache_;
};

// Run one chain; deterministic given (config.seed, stream).
inline Posterior run_chain(const std::vector<double>& series, const SamplerConfig& cfg,
                           std::uint64_t stream = 0) {
  Sampler sampler(series, cfg);
  RngStream rng(cfg.seed, stream);
  return sampler.run(rng);
}

namespace detail {

inline double density_mode(const DiscreteDensity& d) {
  const auto& pts = d.points();
  const auto& ms = d.masses();
  std::size_t best = 0;
  for (std::size_t i = 1; i < ms.size(); ++i)
    if (ms[i] > ms[best]) best = i;
  return pts[best];
}

// keep only points on one side of the cut; fall back to the modal atom if
// nothing survives
inline DiscreteDensity clip_density(const DiscreteDensity& d, double cut, bool keep_below) {
  std::vector<double> pts, ms;
  for (std::size_t i = 0; i < d.points().size(); ++i) {
    const bool keep = keep_below ? d.points()[i] < cut : d.points()[i] >= cut;
    if (keep && d.masses()[i] > 0.0) {
      pts.push_back(d.points()[i]);
      ms.push_back(d.masses()[i]);
    }
  }
  if (pts.empty()) return delta(density_mode(d));
  return DiscreteDensity(std::move(pts), std::move(ms));
}

}  // namespace detail

// Conditional on the modal segment count, turn each interior change point's
// sampled locations into a density. Returns nullopt when the modal count is
// one (no interior change points). Overlapping neighbour histograms are cut
// at the midpoint between their modal locations.
inline std::optional<SetWithUncertainty> modal_changepoint_set(const Posterior& post, int n) {
  require(!post.sample_m.empty(), errc::empty_posterior, "posterior holds no samples");
  const int m0 = post.modal_m();
  if (m0 <= 1) return std::nullopt;
  const int k = m0 - 1;

  std::vector<std::map<int, std::uint64_t>> hist(static_cast<std::size_t>(k));
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < post.sample_m.size(); ++i) {
    if (post.sample_m[i] != m0) continue;
    ++total;
    const auto& cps = post.sample_changepoints[i];
    for (int j = 0; j < k; ++j) {
      require(cps[static_cast<std::size_t>(j)] > 0 && cps[static_cast<std::size_t>(j)] < n,
              errc::numerical_failure, "retained change point outside the series");
      hist[static_cast<std::size_t>(j)][cps[static_cast<std::size_t>(j)]]++;
    }
  }

  std::vector<DiscreteDensity> members;
  members.reserve(static_cast<std::size_t>(k));
  for (const auto& h : hist) {
    std::vector<double> pts, ms;
    pts.reserve(h.size());
    ms.reserve(h.size());
    for (const auto& [pt, count] : h) {
      pts.push_back(static_cast<double>(pt));
      ms.push_back(static_cast<double>(count) / static_cast<double>(total));
    }
    members.emplace_back(std::move(pts), std::move(ms));
  }

  for (int j = 0; j + 1 < k; ++j) {
    auto& left = members[static_cast<std::size_t>(j)];
    auto& right = members[static_cast<std::size_t>(j + 1)];
    if (left.support().second >= right.support().first) {
      const double cut = 0.5 * (detail::density_mode(left) + detail::density_mode(right));
      left = detail::clip_density(left, cut, /*keep_below=*/true);
      right = detail::clip_density(right, cut, /*keep_below=*/false);
    }
  }
  return SetWithUncertainty(std::move(members));
}

}  // namespace mjw
