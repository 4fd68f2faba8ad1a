#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "mdgpd/metrics.hpp"
#include "mdgpd/samplers.hpp"

using namespace mdgpd;

TEST_CASE("two-sample KS", "[metrics]") {
  const std::vector<std::int64_t> a{1, 2, 2, 3, 5};
  CHECK(ks_statistic(a, a) == 0.0);
  const std::vector<std::int64_t> b{10, 11};
  CHECK(ks_statistic(a, b) == 1.0);
  const std::vector<std::int64_t> c{1, 2};
  const std::vector<std::int64_t> d{2, 3};
  CHECK(ks_statistic(c, d) == Catch::Approx(0.5));
  CHECK_THROWS_AS(ks_statistic(std::vector<std::int64_t>{}, a), Error);
}

TEST_CASE("one-sample KS", "[metrics]") {
  auto rs = split_stream(31, "ks-geom");
  const auto g = sample_geometric_unit(rs, 1000000);
  const auto geo_cdf = [](std::int64_t k) { return k < 1 ? 0.0 : -std::expm1(-double(k)); };
  CHECK(ks_statistic(g, geo_cdf) < 0.005);
  // A point mass at 1 against the geometric law: the gap is P(G > 1).
  CHECK(ks_statistic(std::vector<std::int64_t>{1, 1, 1}, geo_cdf) == Catch::Approx(std::exp(-1.0)));
  // Reference mass sitting strictly between observations is detected.
  const auto two_point = [](std::int64_t k) { return k < 0 ? 0.0 : (k < 5 ? 0.5 : 1.0); };
  CHECK(ks_statistic(std::vector<std::int64_t>{10}, two_point) == Catch::Approx(1.0));
  CHECK(ks_statistic(std::vector<std::int64_t>{0, 5}, two_point) == Catch::Approx(0.0));
}

TEST_CASE("quantiles and Q-Q points", "[metrics]") {
  std::vector<std::int64_t> grid(100);
  for (int i = 0; i < 100; ++i) grid[i] = i + 1;
  CHECK(empirical_quantile(grid, 0.99) == 99);
  CHECK(empirical_quantile(grid, 0.5) == 50);
  CHECK(empirical_quantile(grid, 1.0) == 100);
  const auto same = qq_points(grid, grid);
  REQUIRE(same.size() == 99);
  for (const auto& q : same) CHECK(q.qa == q.qb);
  auto shifted = grid;
  for (auto& v : shifted) ++v;
  for (const auto& q : qq_points(grid, shifted)) CHECK(q.qb - q.qa == 1);
  CHECK_THROWS_AS(qq_points(grid, std::vector<std::int64_t>{}), Error);
}

TEST_CASE("total variation and correlation helpers", "[metrics]") {
  const std::map<std::int64_t, double> a{{0, 0.5}, {1, 0.5}};
  const std::map<std::int64_t, double> b{{1, 0.5}, {2, 0.5}};
  CHECK(total_variation(a, a) == 0.0);
  CHECK(total_variation(a, b) == Catch::Approx(0.5));
  const std::vector<double> x{1, 2, 3, 4};
  const std::vector<double> y{2, 4, 6, 8};
  CHECK(correlation(x, y) == Catch::Approx(1.0));
  const auto pmf = empirical_pmf(std::vector<std::int64_t>{1, 1, 2, 4});
  CHECK(pmf.at(1) == Catch::Approx(0.5));
}
