#include <catch2/catch_amalgamated.hpp>

#include "mjw/matrix_analysis.hpp"

#include "../support/generators.hpp"
#include "../support/oracles.hpp"
#include "../support/test_util.hpp"

using mjw::DistanceMatrix;
using mjw::errc;
using mjw::Linkage;
using mjw::NormKind;
using mjw::SetWithUncertainty;
using mjw::TriangleClass;

namespace {

DistanceMatrix from_rows(std::vector<std::vector<double>> rows) {
  std::vector<std::string> labels;
  std::vector<double> values;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    labels.push_back("s" + std::to_string(i));
    for (double v : rows[i]) values.push_back(v);
  }
  return DistanceMatrix(std::move(labels), std::move(values));
}

}  // namespace

TEST_CASE("distance_matrix from uncertain sets") {
  const std::vector<SetWithUncertainty> sets{SetWithUncertainty::from_points({0.0}),
                                             SetWithUncertainty::from_points({0.0, 10.0})};
  const auto d = mjw::distance_matrix(sets, {"a", "b"}, 100, 1.0, 1.0);
  REQUIRE(d.n() == 2);
  REQUIRE(d(0, 1) == 0.025);
  REQUIRE(d(1, 0) == 0.025);
  REQUIRE(d(0, 0) == 0.0);

  // doubling T halves the entries
  const auto half = mjw::distance_matrix(sets, {"a", "b"}, 200, 1.0, 1.0);
  REQUIRE(half(0, 1) == d(0, 1) / 2.0);

  // identical sets give a zero matrix
  const std::vector<SetWithUncertainty> same{sets[0], sets[0], sets[0]};
  const auto zero = mjw::distance_matrix(same, {"a", "b", "c"}, 10, 1.0, 1.0);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) REQUIRE(zero(i, j) == 0.0);

  REQUIRE(testutil::thrown([&] { mjw::distance_matrix({sets[0]}, {"a"}, 10); }) ==
          errc::empty_collection);
}

TEST_CASE("matrix norms") {
  const auto d = from_rows({{0.0, 3.0}, {3.0, 0.0}});
  REQUIRE(mjw::matrix_norm(d, NormKind::l1) == 3.0);
  REQUIRE(mjw::matrix_norm(d, NormKind::l2) == 3.0);
  REQUIRE(mjw::matrix_norm(d, NormKind::op) == Catch::Approx(3.0).margin(1e-10));

  const auto zero = from_rows({{0.0, 0.0}, {0.0, 0.0}});
  for (auto kind : {NormKind::l1, NormKind::l2, NormKind::op})
    REQUIRE(mjw::matrix_norm(zero, kind) == 0.0);
}

TEST_CASE("operator norm matches the eigen oracle on random matrices") {
  mjw::RngStream rng(20260810, 30);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 6;
    std::vector<double> values(n * n, 0.0);
    std::vector<std::string> labels;
    for (std::size_t i = 0; i < n; ++i) {
      labels.push_back("x" + std::to_string(i));
      for (std::size_t j = i + 1; j < n; ++j) {
        const double v = rng.uniform01() * 4.0;
        values[i * n + j] = v;
        values[j * n + i] = v;
      }
    }
    const DistanceMatrix d(labels, values);
    mjw::Matrix a(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) a(i, j) = d(i, j);
    double expect = 0.0;
    for (double ev : oracle::symmetric_eigenvalues_by_charpoly(a))
      expect = std::max(expect, std::fabs(ev));
    REQUIRE(mjw::matrix_norm(d, NormKind::op) == Catch::Approx(expect).margin(1e-8));
  }
}

TEST_CASE("triangle test on the witness matrix") {
  // sets {0}, {0,1}, {1}: distances 0.25, 0.25, 1
  const auto d = from_rows({{0.0, 0.25, 1.0}, {0.25, 0.0, 0.25}, {1.0, 0.25, 0.0}});
  const auto summary = mjw::triangle_test(d);
  REQUIRE(summary.yellow == 2);  // (0,1,2) and (2,1,0), both at ratio exactly 2
  REQUIRE(summary.red == 0);
  REQUIRE(summary.blue == 4);
  REQUIRE(summary.skipped == 0);
  REQUIRE(summary.fail_fraction == Catch::Approx(2.0 / 6.0));
  REQUIRE(summary.mean_fail_ratio.has_value());
  REQUIRE(*summary.mean_fail_ratio == 2.0);
  REQUIRE(summary.at(0, 1, 2) == TriangleClass::yellow);
  REQUIRE(summary.at(0, 2, 1) == TriangleClass::blue);
}

TEST_CASE("triangle test boundary ratios") {
  // ratio exactly 1 stays blue; ratio exactly 2 stays yellow
  const auto exact_one = from_rows({{0.0, 1.0, 2.0}, {1.0, 0.0, 1.0}, {2.0, 1.0, 0.0}});
  const auto s1 = mjw::triangle_test(exact_one);
  REQUIRE(s1.yellow == 0);
  REQUIRE(s1.red == 0);
  REQUIRE(s1.fail_fraction == 0.0);
  REQUIRE_FALSE(s1.mean_fail_ratio.has_value());
}

TEST_CASE("triangle test skips zero-denominator triples") {
  // d01 = d12 = 0, so (0,1,2) and (2,1,0) have denominator zero
  const auto d = from_rows({{0.0, 0.0, 1.0}, {0.0, 0.0, 0.0}, {1.0, 0.0, 0.0}});
  const auto summary = mjw::triangle_test(d);
  REQUIRE(summary.skipped == 2);
  REQUIRE(summary.at(0, 1, 2) == TriangleClass::skipped);
  REQUIRE(summary.at(2, 1, 0) == TriangleClass::skipped);
  REQUIRE(summary.blue + summary.yellow + summary.red == 4);
  REQUIRE(summary.fail_fraction ==
          static_cast<double>(summary.yellow + summary.red) / 4.0);
}

TEST_CASE("triangle test passes on a true metric") {
  mjw::RngStream rng(20260810, 31);
  const std::size_t n = 7;
  std::vector<double> pts(n);
  for (auto& p : pts) p = 10.0 * rng.uniform01();
  std::vector<double> values(n * n, 0.0);
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < n; ++i) labels.push_back("p" + std::to_string(i));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) values[i * n + j] = std::fabs(pts[i] - pts[j]);
  const auto summary = mjw::triangle_test(DistanceMatrix(labels, values));
  REQUIRE(summary.yellow == 0);
  REQUIRE(summary.red == 0);
  REQUIRE(summary.fail_fraction == 0.0);

  REQUIRE(testutil::thrown([&] {
    mjw::triangle_test(from_rows({{0.0, 1.0}, {1.0, 0.0}}));
  }) == errc::too_few_series);
}

TEST_CASE("hierarchical clustering merges") {
  // identical rows merge first at height zero
  const auto dz = from_rows({{0.0, 0.0, 5.0}, {0.0, 0.0, 5.0}, {5.0, 5.0, 0.0}});
  const auto dendro_z = mjw::hierarchical_cluster(dz, Linkage::average);
  REQUIRE(dendro_z.merges[0].height == 0.0);
  REQUIRE(dendro_z.merges[0].left == 0);
  REQUIRE(dendro_z.merges[0].right == 1);

  // points on a line at 0, 1, 10 under average linkage
  const auto d = from_rows({{0.0, 1.0, 10.0}, {1.0, 0.0, 9.0}, {10.0, 9.0, 0.0}});
  const auto dendro = mjw::hierarchical_cluster(d, Linkage::average);
  REQUIRE(dendro.merges.size() == 2);
  REQUIRE(dendro.merges[0].left == 0);
  REQUIRE(dendro.merges[0].right == 1);
  REQUIRE(dendro.merges[0].height == 1.0);
  REQUIRE(dendro.merges[1].height == 9.5);
  REQUIRE(dendro.merges[1].left == 2);
  REQUIRE(dendro.merges[1].right == 3);  // cluster created by the first merge
}

TEST_CASE("single linkage merges no later than complete linkage") {
  mjw::RngStream rng(20260810, 32);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 5;
    std::vector<double> values(n * n, 0.0);
    std::vector<std::string> labels;
    for (std::size_t i = 0; i < n; ++i) labels.push_back("x" + std::to_string(i));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        const double v = 0.5 + 10.0 * rng.uniform01();
        values[i * n + j] = v;
        values[j * n + i] = v;
      }
    const DistanceMatrix d(labels, values);
    const auto single = mjw::hierarchical_cluster(d, Linkage::single);
    const auto complete = mjw::hierarchical_cluster(d, Linkage::complete);
    REQUIRE(single.merges.size() == n - 1);
    REQUIRE(complete.merges.size() == n - 1);
    for (std::size_t s = 0; s < single.merges.size(); ++s)
      REQUIRE(single.merges[s].height <= complete.merges[s].height + 1e-12);
    // merge heights are nondecreasing for these linkages
    for (std::size_t s = 1; s < single.merges.size(); ++s) {
      REQUIRE(single.merges[s].height >= single.merges[s - 1].height - 1e-12);
      REQUIRE(complete.merges[s].height >= complete.merges[s - 1].height - 1e-12);
    }
  }
}

TEST_CASE("distance matrix invariants from random uncertain sets") {
  mjw::RngStream rng(20260810, 33);
  std::vector<SetWithUncertainty> sets;
  std::vector<std::string> labels;
  for (int i = 0; i < 6; ++i) {
    sets.push_back(gen::random_uncertain_set(rng, 4));
    labels.push_back("series" + std::to_string(i));
  }
  const auto d = mjw::distance_matrix(sets, labels, 500, 1.0, 1.0);
  for (std::size_t i = 0; i < d.n(); ++i) {
    REQUIRE(d(i, i) == 0.0);
    for (std::size_t j = 0; j < d.n(); ++j) {
      REQUIRE(d(i, j) == d(j, i));
      REQUIRE(d(i, j) >= 0.0);
    }
  }
  const auto dendro = mjw::hierarchical_cluster(d);
  REQUIRE(dendro.n_leaves == d.n());
  REQUIRE(dendro.merges.size() == d.n() - 1);
}
