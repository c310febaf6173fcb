#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "mjw/changepoint.hpp"

#include "../support/generators.hpp"
#include "../support/oracles.hpp"
#include "../support/test_util.hpp"

using mjw::ChainState;
using mjw::errc;
using mjw::Posterior;
using mjw::RngStream;
using mjw::Sampler;
using mjw::SamplerConfig;

namespace {

SamplerConfig small_config() {
  SamplerConfig cfg;
  cfg.t_min = 20;
  cfg.max_segments = 6;
  cfg.n_iterations = 400;
  cfg.n_burnin = 100;
  cfg.n_basis = 3;
  cfg.seed = 99;
  return cfg;
}

}  // namespace

TEST_CASE("whittle likelihood matches the direct-summation oracle") {
  RngStream rng(20260810, 50);
  const auto x = gen::gaussian_series(rng, 128, 2.0);
  const double sigma2 = 4.0;

  std::vector<double> beta(8, 0.0);
  beta[0] = std::log(sigma2);
  const auto design = mjw::spectral_design(x.size(), 7);
  const double impl = mjw::log_whittle_likelihood(x, beta, design);
  const double direct = oracle::direct_whittle(x, beta);
  REQUIRE(impl == Catch::Approx(direct).epsilon(1e-9));

  // nonzero spline coefficients as well
  RngStream rng2(20260810, 51);
  for (auto& b : beta) b = 0.3 * rng2.normal();
  REQUIRE(mjw::log_whittle_likelihood(x, beta, design) ==
          Catch::Approx(oracle::direct_whittle(x, beta)).epsilon(1e-9));
}

TEST_CASE("whittle likelihood is deterministic and prefers the matching variance") {
  RngStream rng(20260810, 52);
  const auto seg1 = gen::gaussian_series(rng, 200, 1.0);
  auto seg1_copy = seg1;
  const auto design = mjw::spectral_design(seg1.size(), 0);
  const std::vector<double> intercept_only{0.0};
  REQUIRE(mjw::log_whittle_likelihood(seg1, intercept_only, design) ==
          mjw::log_whittle_likelihood(seg1_copy, intercept_only, design));

  const auto seg100 = gen::gaussian_series(rng, 200, 10.0);
  // under f = 1 the unit-variance segment scores higher
  REQUIRE(mjw::log_whittle_likelihood(seg1, intercept_only, design) >
          mjw::log_whittle_likelihood(seg100, intercept_only, design));
  // and the variance-100 segment prefers beta0 = log(100)
  const std::vector<double> matched{std::log(100.0)};
  REQUIRE(mjw::log_whittle_likelihood(seg100, matched, design) >
          mjw::log_whittle_likelihood(seg100, intercept_only, design));

  const std::vector<double> tiny{1.0, 1.0};
  REQUIRE(testutil::thrown([&] {
    mjw::log_whittle_likelihood(std::vector<double>{1.0, 2.0}, tiny, mjw::Matrix(0, 2));
  }) == errc::segment_too_short);
}

TEST_CASE("segment count proposal table") {
  RngStream rng(20260810, 53);
  const auto up = mjw::propose_segment_count(1, 10, 3, rng);
  REQUIRE(up.m_p == 2);
  REQUIRE(up.forward_prob == 1.0);

  const auto down = mjw::propose_segment_count(10, 10, 3, rng);
  REQUIRE(down.m_p == 9);
  REQUIRE(down.forward_prob == 1.0);

  const auto forced_down = mjw::propose_segment_count(5, 10, 0, rng);
  REQUIRE(forced_down.m_p == 4);
  REQUIRE(forced_down.forward_prob == 1.0);

  // interior: both neighbours at probability 1/2, frequency over 1e5 draws
  int ups = 0;
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) {
    const auto prop = mjw::propose_segment_count(5, 10, 2, rng);
    REQUIRE((prop.m_p == 4 || prop.m_p == 6));
    REQUIRE(prop.forward_prob == 0.5);
    if (prop.m_p == 6) ++ups;
  }
  const double freq = static_cast<double>(ups) / draws;
  REQUIRE(std::fabs(freq - 0.5) < 0.01);
}

TEST_CASE("relocation kernel case table") {
  // both neighbours above t_min: three points, 1/3 each
  const auto interior = mjw::relocation_kernel(0, 50, 120, 40);
  REQUIRE(interior.size() == 3);
  REQUIRE(interior[0].t == 49);
  REQUIRE(interior[1].t == 50);
  REQUIRE(interior[2].t == 51);
  for (const auto& kp : interior) REQUIRE(kp.prob == Catch::Approx(1.0 / 3.0));

  // left segment at exactly t_min: cannot move left
  const auto left_pinned = mjw::relocation_kernel(0, 40, 100, 40);
  REQUIRE(left_pinned.size() == 2);
  REQUIRE(left_pinned[0].t == 40);
  REQUIRE(left_pinned[1].t == 41);
  for (const auto& kp : left_pinned) REQUIRE(kp.prob == 0.5);

  // right segment at exactly t_min: cannot move right
  const auto right_pinned = mjw::relocation_kernel(0, 60, 100, 40);
  REQUIRE(right_pinned.size() == 2);
  REQUIRE(right_pinned[0].t == 59);
  REQUIRE(right_pinned[1].t == 60);

  // both at t_min: all mass on staying put
  const auto pinned = mjw::relocation_kernel(0, 40, 80, 40);
  REQUIRE(pinned.size() == 1);
  REQUIRE(pinned[0].t == 40);
  REQUIRE(pinned[0].prob == 1.0);

  // q1 window size for segment lengths (60, 50) at t_min = 40
  const int n_left = 60, n_right = 50, t_min = 40;
  const int wlo = 0 + n_left + 0;  // xi_prev = 0, xi_cur = 60, xi_next = 110
  (void)wlo;
  const int support = (0 + n_left + n_right - t_min) - (0 + t_min) + 1;
  REQUIRE(support == 31);
  REQUIRE(support == n_left + n_right - 2 * t_min + 1);
}

TEST_CASE("relocation kernel frequencies match the table") {
  RngStream rng(20260810, 54);
  const auto kern = mjw::relocation_kernel(0, 50, 120, 40);
  std::map<int, int> counts;
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) counts[mjw::sample_kernel(kern, rng)]++;
  for (const auto& kp : kern)
    REQUIRE(std::fabs(static_cast<double>(counts[kp.t]) / draws - kp.prob) < 0.01);

  const auto half = mjw::relocation_kernel(0, 40, 100, 40);
  counts.clear();
  for (int i = 0; i < draws; ++i) counts[mjw::sample_kernel(half, rng)]++;
  REQUIRE(std::fabs(static_cast<double>(counts[40]) / draws - 0.5) < 0.01);
  REQUIRE(std::fabs(static_cast<double>(counts[41]) / draws - 0.5) < 0.01);
}

TEST_CASE("tau2 split and merge") {
  // u = 1/2 leaves both halves at the original value
  const auto even = mjw::split_tau2(3.0, 0.5);
  REQUIRE(even.first == 3.0);
  REQUIRE(even.second == 3.0);

  // u = 1/4 with tau2 = 3 gives (1, 9)
  const auto skew = mjw::split_tau2(3.0, 0.25);
  REQUIRE(skew.first == Catch::Approx(1.0).margin(1e-12));
  REQUIRE(skew.second == Catch::Approx(9.0).margin(1e-12));

  REQUIRE(mjw::merge_tau2(1.0, 9.0) == 3.0);
  REQUIRE(mjw::merge_tau2(4.0, 4.0) == 4.0);

  // the two stated Jacobian expressions agree: 2 tau^2/(u(1-u)) = 2(tau_l + tau_r)^2
  REQUIRE(std::exp(mjw::birth_log_jacobian(3.0, 0.25)) == Catch::Approx(32.0).margin(1e-10));
  RngStream rng(20260810, 55);
  for (int trial = 0; trial < 200; ++trial) {
    const double tau2 = 0.01 + 10.0 * rng.uniform01();
    const double u = rng.uniform_open01();
    const auto [l, r] = mjw::split_tau2(tau2, u);
    REQUIRE(l * r == Catch::Approx(tau2 * tau2).epsilon(1e-12));  // product identity
    const double jac1 = 2.0 * tau2 / (u * (1.0 - u));
    const double jac2 = 2.0 * (std::sqrt(l) + std::sqrt(r)) * (std::sqrt(l) + std::sqrt(r));
    REQUIRE(jac1 == Catch::Approx(jac2).epsilon(1e-10));
    // split then merge restores tau^2
    REQUIRE(mjw::merge_tau2(l, r) == Catch::Approx(tau2).epsilon(1e-12));
    // and the recovered split fraction reproduces u
    REQUIRE(mjw::split_fraction(l, r) == Catch::Approx(u).epsilon(1e-10));
  }
}

TEST_CASE("death log acceptance mirrors the birth at identical draws") {
  RngStream data_rng(20260810, 56);
  const auto x = gen::gaussian_series(data_rng, 160, 1.0);
  SamplerConfig cfg;
  cfg.t_min = 30;
  cfg.max_segments = 5;
  cfg.n_basis = 3;
  Sampler sampler(x, cfg);

  RngStream rng(20260810, 57);
  for (int trial = 0; trial < 10; ++trial) {
    ChainState merged = sampler.make_state({0, 160});
    merged.tau2[0] = 0.5 + 4.0 * rng.uniform01();

    // forced birth: fixed split point, u, and coefficient draws
    mjw::Sampler::BirthForcing forcing;
    forcing.seg_index = 0;
    forcing.split_point = static_cast<int>(rng.uniform_int(30, 130));
    forcing.u = rng.uniform_open01();
    {
      const auto fit_l = sampler.laplace_fit(
          sampler.segment_periodogram(0, forcing.split_point),
          sampler.design_for_length(forcing.split_point),
          mjw::split_tau2(merged.tau2[0], forcing.u).first);
      const auto fit_r = sampler.laplace_fit(
          sampler.segment_periodogram(forcing.split_point, 160),
          sampler.design_for_length(160 - forcing.split_point),
          mjw::split_tau2(merged.tau2[0], forcing.u).second);
      forcing.beta_left = sampler.laplace_sample(fit_l, rng);
      forcing.beta_right = sampler.laplace_sample(fit_r, rng);
    }
    ChainState birth_state = merged;
    const auto birth = sampler.birth_move(birth_state, rng, &forcing);

    // construct the post-birth state regardless of the accept draw
    ChainState split_state = merged;
    split_state.xi = {0, forcing.split_point, 160};
    const auto pair = mjw::split_tau2(merged.tau2[0], forcing.u);
    split_state.tau2 = {pair.first, pair.second};
    split_state.beta = {forcing.beta_left, forcing.beta_right};
    split_state.seg_loglik.assign(2, 0.0);
    sampler.refresh_segment_loglik(split_state, 0);
    sampler.refresh_segment_loglik(split_state, 1);

    // mirrored death: remove the same point, draw the original coefficients
    mjw::Sampler::DeathForcing death_forcing;
    death_forcing.removal_index = 1;
    death_forcing.beta_merged = merged.beta[0];
    ChainState death_state = split_state;
    const auto death = sampler.death_move(death_state, rng, &death_forcing);

    REQUIRE(death.log_alpha == Catch::Approx(-birth.log_alpha).margin(1e-9));
  }
}

TEST_CASE("moves preserve partition validity") {
  RngStream data_rng(20260810, 58);
  const auto x = gen::gaussian_series(data_rng, 220, 1.0);
  SamplerConfig cfg = small_config();
  Sampler sampler(x, cfg);
  RngStream rng(cfg.seed, 0);
  ChainState s = sampler.initial_state();
  REQUIRE(s.valid(220, cfg.t_min));
  for (int iter = 0; iter < 300; ++iter) {
    const auto prop =
        mjw::propose_segment_count(s.m(), cfg.max_segments, sampler.count_splittable(s), rng);
    if (prop.m_p > s.m()) {
      sampler.birth_move(s, rng);
    } else {
      sampler.death_move(s, rng);
    }
    REQUIRE(s.valid(220, cfg.t_min));
    sampler.within_move(s, rng);
    REQUIRE(s.valid(220, cfg.t_min));
  }
}

TEST_CASE("move preconditions") {
  RngStream data_rng(20260810, 59);
  const auto x = gen::gaussian_series(data_rng, 100, 1.0);
  SamplerConfig cfg;
  cfg.t_min = 30;
  cfg.max_segments = 3;
  Sampler sampler(x, cfg);
  RngStream rng(1, 0);

  // m = 1: no removable change point
  ChainState single = sampler.make_state({0, 100});
  REQUIRE(testutil::thrown([&] { sampler.death_move(single, rng); }) ==
          errc::no_removable_changepoint);

  // both segments too short to split, and m = max_segments
  ChainState full = sampler.make_state({0, 50, 100});
  REQUIRE(sampler.count_splittable(full) == 0);
  REQUIRE(testutil::thrown([&] { sampler.birth_move(full, rng); }) ==
          errc::no_splittable_segment);

  REQUIRE(testutil::thrown([&] {
    SamplerConfig bad;
    bad.t_min = 60;
    Sampler(std::vector<double>(100, 1.0), bad);
  }) == errc::series_too_short);

  std::vector<double> with_nan(100, 1.0);
  with_nan[50] = std::nan("");
  REQUIRE(testutil::thrown([&] { Sampler(with_nan, cfg); }) == errc::non_finite_input);
  REQUIRE(testutil::thrown([&] {
    Sampler(std::vector<double>{1.0, 2.0}, SamplerConfig{});
  }) == errc::series_too_short);
}

TEST_CASE("run_chain is deterministic given the seed") {
  RngStream data_rng(20260810, 60);
  std::vector<double> x(150);
  for (std::size_t t = 0; t < x.size(); ++t)
    x[t] = (t < 75 ? 1.0 : 6.0) * data_rng.normal();  // planted break keeps m >= 2 live
  SamplerConfig cfg = small_config();
  cfg.n_iterations = 300;
  cfg.n_burnin = 50;

  const Posterior a = mjw::run_chain(x, cfg);
  const Posterior b = mjw::run_chain(x, cfg);
  REQUIRE(a.sample_m == b.sample_m);
  REQUIRE(a.sample_changepoints == b.sample_changepoints);
  REQUIRE(a.m_histogram == b.m_histogram);
  REQUIRE(a.birth.accepted == b.birth.accepted);
  REQUIRE(a.death.attempted == b.death.attempted);

  // different stream: different draws
  const Posterior c = mjw::run_chain(x, cfg, 7);
  REQUIRE(a.sample_changepoints != c.sample_changepoints);

  // retained samples respect the partition invariants
  std::uint64_t histogram_total = 0;
  for (auto count : a.m_histogram) histogram_total += count;
  REQUIRE(histogram_total == a.sample_m.size());
  REQUIRE(a.sample_m.size() ==
          static_cast<std::size_t>(cfg.n_iterations - cfg.n_burnin));
  for (std::size_t i = 0; i < a.sample_m.size(); ++i) {
    const auto& cps = a.sample_changepoints[i];
    REQUIRE(static_cast<int>(cps.size()) == a.sample_m[i] - 1);
    int prev = 0;
    for (int cp : cps) {
      REQUIRE(cp - prev >= cfg.t_min);
      prev = cp;
    }
    REQUIRE(150 - prev >= cfg.t_min);
  }

  // gibbs draws are always accepted
  REQUIRE(a.gibbs.attempted > 0);
  REQUIRE(a.gibbs.accepted == a.gibbs.attempted);
}

TEST_CASE("run_chain finds a planted variance shift") {
  RngStream data_rng(424242, 0);
  std::vector<double> x(400);
  for (std::size_t t = 0; t < x.size(); ++t)
    x[t] = (t < 200 ? 1.0 : 5.0) * data_rng.normal();

  SamplerConfig cfg;
  cfg.t_min = 40;
  cfg.max_segments = 8;
  cfg.n_iterations = 1500;
  cfg.n_burnin = 500;
  cfg.n_basis = 5;
  cfg.seed = 7;
  const Posterior post = mjw::run_chain(x, cfg);
  REQUIRE(post.modal_m() == 2);
  const auto set = mjw::modal_changepoint_set(post, 400);
  REQUIRE(set.has_value());
  REQUIRE(set->size() == 1);
  const double mode = set->members()[0].points()[0];  // just needs to be near 200
  double best_mass = 0.0;
  double best_point = 0.0;
  for (std::size_t i = 0; i < set->members()[0].size(); ++i) {
    if (set->members()[0].masses()[i] > best_mass) {
      best_mass = set->members()[0].masses()[i];
      best_point = set->members()[0].points()[i];
    }
  }
  (void)mode;
  REQUIRE(std::fabs(best_point - 200.0) <= 30.0);
}

TEST_CASE("modal_changepoint_set from hand-built posteriors") {
  Posterior post;
  post.m_histogram.assign(6, 0);

  // every retained sample has m = 2; locations 249 (40 draws) and 250 (60)
  for (int i = 0; i < 40; ++i) {
    post.sample_m.push_back(2);
    post.sample_changepoints.push_back({249});
  }
  for (int i = 0; i < 60; ++i) {
    post.sample_m.push_back(2);
    post.sample_changepoints.push_back({250});
  }
  post.m_histogram[2] = 100;
  const auto set = mjw::modal_changepoint_set(post, 500);
  REQUIRE(set.has_value());
  REQUIRE(set->size() == 1);
  REQUIRE(set->members()[0].points() == std::vector<double>{249.0, 250.0});
  REQUIRE(set->members()[0].masses() == std::vector<double>{0.4, 0.6});

  // modal m = 1: designated empty marker
  Posterior null_post;
  null_post.m_histogram.assign(6, 0);
  for (int i = 0; i < 10; ++i) {
    null_post.sample_m.push_back(1);
    null_post.sample_changepoints.push_back({});
  }
  null_post.m_histogram[1] = 10;
  REQUIRE_FALSE(mjw::modal_changepoint_set(null_post, 500).has_value());

  // histogram ties break toward fewer segments
  Posterior tied;
  tied.m_histogram.assign(6, 0);
  for (int i = 0; i < 5; ++i) {
    tied.sample_m.push_back(1);
    tied.sample_changepoints.push_back({});
    tied.sample_m.push_back(2);
    tied.sample_changepoints.push_back({100});
  }
  tied.m_histogram[1] = 5;
  tied.m_histogram[2] = 5;
  REQUIRE(tied.modal_m() == 1);

  Posterior empty;
  REQUIRE(testutil::thrown([&] { mjw::modal_changepoint_set(empty, 500); }) ==
          errc::empty_posterior);
}

TEST_CASE("modal_changepoint_set repairs overlapping histograms") {
  Posterior post;
  post.m_histogram.assign(6, 0);
  auto add = [&](int a, int b) {
    post.sample_m.push_back(3);
    post.sample_changepoints.push_back({a, b});
  };
  add(100, 101);
  add(100, 101);
  add(100, 105);
  add(101, 105);
  post.m_histogram[3] = 4;

  const auto set = mjw::modal_changepoint_set(post, 500);
  REQUIRE(set.has_value());
  REQUIRE(set->size() == 2);
  // modes 100 and 101, cut at 100.5: left keeps {100}, right keeps {101,105}
  REQUIRE(set->members()[0].points() == std::vector<double>{100.0});
  REQUIRE(set->members()[1].points() == std::vector<double>{101.0, 105.0});
  REQUIRE(set->members()[1].masses() == std::vector<double>{0.5, 0.5});
  REQUIRE(set->members()[0].support().second < set->members()[1].support().first);
}

// Two-state toy target: with n = 24 and t_min = 10 the chain can only sit at
// m = 1 or m = 2 (five split points). With an intercept-only spectrum the
// per-segment marginal likelihood is a one-dimensional integral, so the
// posterior over m can be enumerated by quadrature and compared with the
// chain's occupancy.
namespace {

double segment_log_marginal(const std::vector<double>& x, int lo, int hi) {
  const std::vector<double> seg(x.begin() + lo, x.begin() + hi);
  const auto pgram = oracle::direct_periodogram(seg);
  auto loglik = [&](double b0) {
    double s = 0.0;
    for (double ik : pgram) s += -b0 - ik * std::exp(-b0);
    return s;
  };
  const double prior_var = 1e4;
  auto logpost = [&](double b0) {
    return loglik(b0) - 0.5 * b0 * b0 / prior_var -
           0.5 * std::log(2.0 * M_PI * prior_var);
  };
  double mode = 0.0, best = -1e300;
  for (double b = -40.0; b <= 40.0; b += 0.01) {
    const double v = logpost(b);
    if (v > best) {
      best = v;
      mode = b;
    }
  }
  double curv = 1.0 / prior_var;
  for (double ik : pgram) curv += ik * std::exp(-mode);
  const double sd = 1.0 / std::sqrt(curv);
  const double lo_b = mode - 15.0 * sd, hi_b = mode + 15.0 * sd;
  const int cells = 200000;
  const double db = (hi_b - lo_b) / cells;
  oracle::KahanSum acc;
  for (int i = 0; i < cells; ++i) {
    const double b = lo_b + (static_cast<double>(i) + 0.5) * db;
    acc.add(std::exp(logpost(b) - best) * db);
  }
  return best + std::log(acc.s);
}

}  // namespace

TEST_CASE("chain occupancy of m matches direct enumeration on a toy target") {
  RngStream data_rng(20260810, 61);
  const auto x = gen::gaussian_series(data_rng, 24, 1.0);

  SamplerConfig cfg;
  cfg.t_min = 10;
  cfg.max_segments = 2;
  cfg.n_basis = 0;
  cfg.n_iterations = 65000;
  cfg.n_burnin = 5000;
  cfg.seed = 31337;

  // enumerate: p(m=1) ~ Z(0,24); p(m=2,t) ~ (1/5) Z(0,t) Z(t,24)
  const double log_p1 = segment_log_marginal(x, 0, 24);
  std::vector<double> log_p2;
  for (int t = 10; t <= 14; ++t)
    log_p2.push_back(-std::log(5.0) + segment_log_marginal(x, 0, t) +
                     segment_log_marginal(x, t, 24));
  double max_term = log_p1;
  for (double v : log_p2) max_term = std::max(max_term, v);
  double z1 = std::exp(log_p1 - max_term);
  double z2 = 0.0;
  for (double v : log_p2) z2 += std::exp(v - max_term);
  const double target_p2 = z2 / (z1 + z2);

  const Posterior post = mjw::run_chain(x, cfg);
  const std::size_t kept = post.sample_m.size();
  double freq2 = 0.0;
  for (int m : post.sample_m) freq2 += (m == 2);
  freq2 /= static_cast<double>(kept);

  // batch-means Monte Carlo standard error
  const std::size_t batches = 100;
  const std::size_t batch_len = kept / batches;
  std::vector<double> means;
  for (std::size_t b = 0; b < batches; ++b) {
    double s = 0.0;
    for (std::size_t i = b * batch_len; i < (b + 1) * batch_len; ++i)
      s += (post.sample_m[i] == 2);
    means.push_back(s / static_cast<double>(batch_len));
  }
  double mean = 0.0;
  for (double v : means) mean += v;
  mean /= static_cast<double>(batches);
  double var = 0.0;
  for (double v : means) var += (v - mean) * (v - mean);
  var /= static_cast<double>(batches - 1);
  const double mcse = std::sqrt(var / static_cast<double>(batches));

  INFO("target " << target_p2 << " freq " << freq2 << " mcse " << mcse);
  REQUIRE(std::fabs(freq2 - target_p2) <= 3.0 * mcse);
}
