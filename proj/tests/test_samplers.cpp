#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "mdgpd/analytics.hpp"
#include "mdgpd/metrics.hpp"
#include "mdgpd/samplers.hpp"
#include "oracles.hpp"

using namespace mdgpd;

namespace {

constexpr std::size_t kBig = 1000000;

double frac(const std::vector<std::int64_t>& v, auto pred) {
  return static_cast<double>(std::count_if(v.begin(), v.end(), pred)) / static_cast<double>(v.size());
}

std::vector<double> as_double(const std::vector<std::int64_t>& v) { return {v.begin(), v.end()}; }

std::vector<std::int64_t> row_max(const CountSample& s) {
  std::vector<std::int64_t> out(s.rows());
  for (std::size_t r = 0; r < s.rows(); ++r) {
    const auto row = s.row(r);
    out[r] = *std::max_element(row.begin(), row.end());
  }
  return out;
}

}  // namespace

TEST_CASE("geometric maxima follow 1 - exp(-k)", "[samplers]") {
  auto rs = split_stream(1, "geom");
  const auto g = sample_geometric_unit(rs, kBig);
  CHECK(std::all_of(g.begin(), g.end(), [](auto v) { return v >= 1; }));
  CHECK(std::abs(frac(g, [](auto v) { return v == 1; }) - (1 - std::exp(-1.0))) < 0.002);
  CHECK(std::abs(frac(g, [](auto v) { return v <= 3; }) - (1 - std::exp(-3.0))) < 0.002);
}

TEST_CASE("generators reproduce their defining moments", "[samplers]") {
  SECTION("independent Poisson means") {
    auto rs = split_stream(2, "gen-a");
    const auto t = sample_generator(type_a_generator(), rs, kBig);
    CHECK(std::abs(mean(as_double(t.column(0))) - 1.0) < 0.01);
    CHECK(std::abs(mean(as_double(t.column(1))) - 1.0) < 0.01);
  }
  SECTION("common shock correlation") {
    auto rs = split_stream(2, "gen-b");
    const auto t = sample_generator(type_b_generator(), rs, kBig);
    CHECK(std::abs(correlation(as_double(t.column(0)), as_double(t.column(1))) - 0.99) < 0.005);
    CHECK(std::abs(mean(as_double(t.column(0))) - 1.0) < 0.01);
  }
  SECTION("deterministic shift moves Delta by 12") {
    auto rs = split_stream(2, "gen-c");
    const auto t = sample_generator(type_c_generator(1.0, false), rs, kBig);
    std::vector<double> d(t.rows());
    for (std::size_t r = 0; r < t.rows(); ++r) d[r] = static_cast<double>(t(r, 0) - t(r, 1));
    CHECK(std::abs(mean(d) - 12.0) < 0.02);
  }
  SECTION("random shift mixture is bimodal at +-12") {
    auto rs = split_stream(2, "gen-c-mix");
    const auto t = sample_generator(type_c_generator(), rs, 200000);
    std::vector<std::int64_t> d(t.rows());
    for (std::size_t r = 0; r < t.rows(); ++r) d[r] = t(r, 0) - t(r, 1);
    CHECK(std::abs(frac(d, [](auto v) { return v > 0; }) - 0.5) < 0.01);
    CHECK(std::abs(frac(d, [](auto v) { return v == 12; }) - oracle::skellam(0, 1, 1) / 2) < 0.005);
  }
  SECTION("invalid specs are rejected") {
    auto rs = split_stream(2, "bad");
    GeneratorSpec bad;
    bad.kind = GeneratorKind::PoissonCommonShock;
    bad.rates = {1.0, 1.0};
    bad.target_corr = 1.5;
    CHECK_THROWS_AS(sample_generator(bad, rs, 10), Error);
  }
}

TEST_CASE("delta_from_generator matches the direct formula", "[samplers]") {
  CountSample t(2, {3, 1, 2, 2});
  const auto d = delta_from_generator(t);
  CHECK(d(0, 0) == 2);
  CHECK(d(0, 1) == -2);
  CHECK(d(1, 0) == 0);
  CHECK(d(1, 1) == 0);
  const auto d3 = delta_from_generator(CountSample(3, {1, 4, 2}));
  CHECK(d3.values() == std::vector<std::int64_t>{-3, 2, -2});
  CHECK_THROWS_AS(delta_from_generator(CountSample(1, std::vector<std::int64_t>{5})), Error);
}

TEST_CASE("row maximum coordinates are exactly those with nonnegative Delta", "[samplers][property]") {
  auto rs = split_stream(3, "rowmax");
  const auto t = sample_generator(broadcast_spec(type_a_generator(), 4), rs, 20000);
  const auto d = delta_from_generator(t);
  for (std::size_t r = 0; r < t.rows(); ++r) {
    const auto row = t.row(r);
    const auto mx = *std::max_element(row.begin(), row.end());
    for (std::size_t i = 0; i < 4; ++i) REQUIRE((row[i] == mx) == (d(r, i) >= 0));
  }
}

TEST_CASE("standard bivariate sampler matches enumeration oracles", "[samplers]") {
  SECTION("degenerate Delta gives N1 = N2 = G") {
    auto rs = split_stream(4, "delta0");
    const auto n = sample_standard_mdgpd(DeltaPmf::point_mass(0), rs, kBig);
    bool equal = true;
    for (std::size_t r = 0; r < n.rows(); ++r) equal = equal && n(r, 0) == n(r, 1);
    CHECK(equal);
    CHECK(std::abs(frac(n.column(0), [](auto v) { return v == 1; }) - (1 - std::exp(-1.0))) < 0.002);
  }
  SECTION("Delta uniform on -1, +1") {
    std::map<long, double> delta{{-1, 0.5}, {1, 0.5}};
    const auto joint = oracle::joint_by_enumeration(delta);
    double p0 = 0.0;
    for (const auto& [k, p] : joint) p0 += k.first == 0 ? p : 0.0;
    CHECK(p0 == Catch::Approx((1 - std::exp(-1.0)) / 2).epsilon(1e-12));
    auto rs = split_stream(4, "delta-pm1");
    const auto n = sample_standard_mdgpd(DeltaPmf({-1, 1}, {0.5, 0.5}), rs, kBig);
    CHECK(std::abs(frac(n.column(0), [](auto v) { return v == 0; }) - p0) < 0.002);
  }
  SECTION("type (a) cell (1,1)") {
    const double p_delta0 = oracle::skellam(0, 1, 1);
    CHECK(p_delta0 == Catch::Approx(0.30851).margin(1e-5));
    auto rs = split_stream(4, "type-a");
    const auto n = sample_standard_mdgpd(type_a_generator(), rs, kBig);
    std::size_t hits = 0;
    for (std::size_t r = 0; r < n.rows(); ++r) hits += (n(r, 0) == 1 && n(r, 1) == 1) ? 1 : 0;
    CHECK(std::abs(static_cast<double>(hits) / kBig - (1 - std::exp(-1.0)) * p_delta0) < 0.002);
  }
}

TEST_CASE("row maxima are geometric and independent of the profile", "[samplers][property]") {
  for (const auto& spec : {type_a_generator(), type_b_generator(), type_c_generator()}) {
    auto rs = split_stream(5, std::string(to_string(spec.kind)));
    const auto n = sample_standard_mdgpd(spec, rs, kBig);
    const auto mx = row_max(n);
    CHECK(*std::min_element(mx.begin(), mx.end()) >= 1);
    const double ks = ks_statistic(mx, [](std::int64_t k) { return k < 1 ? 0.0 : -std::expm1(-double(k)); });
    CHECK(ks < 0.005);
    std::vector<double> neg1(n.rows()), neg2(n.rows());
    for (std::size_t r = 0; r < n.rows(); ++r) {
      neg1[r] = static_cast<double>(n(r, 0) - mx[r]);
      neg2[r] = static_cast<double>(n(r, 1) - mx[r]);
    }
    const auto mxd = as_double(mx);
    CHECK(std::abs(correlation(mxd, neg1)) < 0.01);
    CHECK(std::abs(correlation(mxd, neg2)) < 0.01);
  }
}

TEST_CASE("memorylessness holds for every generator", "[samplers][property]") {
  std::vector<GeneratorSpec> specs{type_a_generator(), type_b_generator(), type_c_generator(),
                                   type_c_generator(1.0, false)};
  GeneratorSpec emp;
  emp.kind = GeneratorKind::EmpiricalDelta;
  emp.delta_pmf = DeltaPmf({-3, 0, 2}, {0.2, 0.5, 0.3});
  specs.push_back(emp);
  int idx = 0;
  for (const auto& spec : specs) {
    auto rs = split_stream(6, "memoryless").split("spec", static_cast<std::uint64_t>(idx++));
    const auto n = sample_standard_mdgpd(spec, rs, kBig);
    for (int which = 0; which < 2; ++which) {
      const auto col = n.column(static_cast<std::size_t>(which));
      const double pos = frac(col, [](auto v) { return v > 0; });
      // Coordinates pushed far below zero by a shift leave too few positive draws to test.
      if (pos * kBig < 1e5) continue;
      for (int k = 1; k <= 5; ++k) {
        const double cond = frac(col, [k](auto v) { return v > k; }) / pos;
        CHECK(std::abs(cond - std::exp(-k)) < 0.005);
      }
    }
  }
}

TEST_CASE("d-dimensional sampler", "[samplers]") {
  SECTION("rows have a geometric maximum attained with Delta >= 0") {
    auto rs = split_stream(7, "d3");
    const auto n = sample_standard_mdgpd_d(type_a_generator(), rs, 50000, 3);
    const auto d = delta_from_generator(n);
    for (std::size_t r = 0; r < n.rows(); ++r) {
      const auto row = n.row(r);
      const auto mx = *std::max_element(row.begin(), row.end());
      REQUIRE(mx >= 1);
      bool found = false;
      for (std::size_t i = 0; i < 3; ++i) found = found || (row[i] == mx && d(r, i) >= 0);
      REQUIRE(found);
    }
  }
  SECTION("degenerate generator gives (G, G, G)") {
    GeneratorSpec shifted;
    shifted.kind = GeneratorKind::PoissonShifted;
    shifted.rates = {1e-300, 1e-300, 1e-300};
    shifted.shifts = {0, 0, 0};
    auto rs = split_stream(7, "degenerate");
    const auto n = sample_standard_mdgpd_d(shifted, rs, 10000, 3);
    for (std::size_t r = 0; r < n.rows(); ++r) REQUIRE((n(r, 0) == n(r, 1) && n(r, 1) == n(r, 2)));
  }
  SECTION("memoryless marginals at d = 3") {
    auto rs = split_stream(7, "d3-memoryless");
    const auto n = sample_standard_mdgpd_d(type_a_generator(), rs, kBig, 3);
    for (std::size_t i = 0; i < 3; ++i) {
      const auto col = n.column(i);
      const double pos = frac(col, [](auto v) { return v > 0; });
      for (int k = 1; k <= 3; ++k) {
        CHECK(std::abs(frac(col, [k](auto v) { return v > k; }) / pos - std::exp(-k)) < 0.005);
      }
    }
  }
  SECTION("dimension below two is rejected") {
    auto rs = split_stream(7, "d1");
    CHECK_THROWS_AS(sample_standard_mdgpd_d(type_a_generator(), rs, 10, 1), Error);
  }
}

TEST_CASE("bootstrap resampling", "[samplers]") {
  SECTION("point mass Delta stays on the diagonal") {
    CountSample obs(2, {1, 1, 3, 3, 2, 2});
    auto rs = split_stream(8, "boot0");
    const auto b = bootstrap_mdgpd(obs, rs, 1000);
    for (std::size_t r = 0; r < b.rows(); ++r) REQUIRE(b(r, 0) == b(r, 1));
  }
  SECTION("resampled Delta matches the observed Delta") {
    auto rs = split_stream(8, "boot-a");
    auto obs_stream = rs.split("observed");
    const auto obs = sample_standard_mdgpd(type_a_generator(), obs_stream, 10000);
    auto boot_stream = rs.split("boot");
    const auto b = bootstrap_mdgpd(obs, boot_stream, 100000);
    std::vector<std::int64_t> d_obs(obs.rows()), d_boot(b.rows());
    for (std::size_t r = 0; r < obs.rows(); ++r) d_obs[r] = obs(r, 0) - obs(r, 1);
    for (std::size_t r = 0; r < b.rows(); ++r) d_boot[r] = b(r, 0) - b(r, 1);
    CHECK(ks_statistic(d_obs, d_boot) < 0.02);
  }
  SECTION("empty output and empty input") {
    CountSample obs(2, {1, 1});
    auto rs = split_stream(8, "boot-empty");
    CHECK(bootstrap_mdgpd(obs, rs, 0).rows() == 0);
    CHECK_THROWS_AS(bootstrap_mdgpd(CountSample(2, {}), rs, 5), Error);
  }
  SECTION("d = 3 resampling keeps observed profiles") {
    auto rs = split_stream(8, "boot-d3");
    auto obs_stream = rs.split("observed");
    const auto obs = sample_standard_mdgpd_d(type_a_generator(), obs_stream, 2000, 3);
    auto boot_stream = rs.split("boot");
    const auto b = bootstrap_mdgpd_d(obs, boot_stream, 20000);
    const auto mx = row_max(b);
    CHECK(ks_statistic(mx, [](std::int64_t k) { return k < 1 ? 0.0 : -std::expm1(-double(k)); }) < 0.02);
    for (std::size_t i = 0; i < 3; ++i) CHECK(ks_statistic(obs.column(i), b.column(i)) < 0.05);
  }
}

TEST_CASE("gamma-ratio sampler", "[samplers]") {
  SECTION("d = 1, alpha = beta = 1 survival is 1/(1+l)") {
    auto rs = split_stream(9, "gamma-d1");
    const auto m = sample_gamma_ratio_mdgpd(type_a_generator(), {1.0, 1.0}, rs, kBig, 1);
    const auto col = m.column(0);
    for (int l : {0, 1, 2, 5}) CHECK(std::abs(frac(col, [l](auto v) { return v > l; }) - 1.0 / (1 + l)) < 0.003);
  }
  SECTION("large alpha with beta = alpha approaches the standard law") {
    auto rs = split_stream(9, "gamma-large");
    const auto m = sample_gamma_ratio_mdgpd(type_a_generator(), {4000.0, 4000.0}, rs, 200000, 2);
    auto rs2 = split_stream(9, "standard");
    const auto n = sample_standard_mdgpd_d(type_a_generator(), rs2, 200000, 2);
    CHECK(ks_statistic(m.column(0), n.column(0)) < 0.01);
    CHECK(ks_statistic(m.column(1), n.column(1)) < 0.01);
  }
  SECTION("d = 2 diagonal cdf matches the gamma-ratio evaluator") {
    auto rs = split_stream(9, "gamma-d2");
    const GammaParams g{2.0, 2.0};
    const auto m = sample_gamma_ratio_mdgpd(type_a_generator(), g, rs, kBig, 2);
    const auto s = build_spectral(type_a_generator(), 2);
    const auto c = LinearConstraint::identity(2, {0, 0});
    for (std::int64_t k = 0; k <= 6; ++k) {
      std::size_t hits = 0;
      for (std::size_t r = 0; r < m.rows(); ++r) hits += (m(r, 0) <= k && m(r, 1) <= k) ? 1 : 0;
      const std::vector<std::int64_t> kk{k, k};
      CHECK(std::abs(static_cast<double>(hits) / kBig - cdf_gamma_ratio(kk, c, g, s)) < 0.005);
    }
  }
}

TEST_CASE("continuous and discretized MGPD samplers", "[samplers]") {
  SECTION("xi = 0, sigma = 1, d = 1 integer part is geometric from zero") {
    ModelParams p{{1.0}, {0.0}, 0.0, {}, 1};
    auto rs = split_stream(10, "floor-e");
    const auto n = sample_discretized_mgpd(type_a_generator(), p, rs, kBig);
    CHECK(std::abs(frac(n.column(0), [](auto v) { return v == 0; }) - (1 - std::exp(-1.0))) < 0.002);
  }
  SECTION("maximum of the standardized draw is unit exponential") {
    ModelParams p{{1.5, 1.5}, {0.2, 0.2}, 0.0, {1.0, 1.0}, 2};
    auto rs = split_stream(10, "max-exp");
    const auto x = sample_continuous_mgpd(type_a_generator(), p, rs, kBig);
    std::vector<double> z(x.rows());
    for (std::size_t r = 0; r < x.rows(); ++r) {
      double mx = -1e300;
      for (std::size_t i = 0; i < 2; ++i) mx = std::max(mx, std::log1p(0.2 * x(r, i) / 1.5) / 0.2);
      z[r] = mx;
    }
    std::sort(z.begin(), z.end());
    double ks = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
      const double f = -std::expm1(-z[i]);
      ks = std::max({ks, std::abs(f - double(i) / z.size()), std::abs(f - double(i + 1) / z.size())});
    }
    CHECK(ks < 0.01);
  }
  SECTION("large scale: discretized MGPD and MDGPD nearly coincide") {
    ModelParams p{{1000.0, 1000.0}, {0.2, 0.2}, 0.0, {1.0, 1.0}, 2};
    const auto s = build_spectral(type_a_generator(), 2);
    double tv = 0.0;
    for (std::int64_t k = -20000; k <= 200000; ++k) {
      const double a = marginal_cdf_nonstandard(k, 0, p, s) - marginal_cdf_nonstandard(k - 1, 0, p, s);
      const double b = marginal_cdf_discretized(k, 0, p, s) - marginal_cdf_discretized(k - 1, 0, p, s);
      tv += std::abs(a - b);
    }
    CHECK(0.5 * tv < 0.01);
    auto r1 = split_stream(10, "disc");
    auto r2 = split_stream(10, "mdgpd");
    const auto a = sample_discretized_mgpd(type_a_generator(), p, r1, kBig);
    const auto b = sample_nonstandard_mdgpd(type_a_generator(), p, r2, kBig);
    CHECK(ks_statistic(a.column(0), b.column(0)) < 0.01);
    CHECK(ks_statistic(a.column(1), b.column(1)) < 0.01);
  }
  SECTION("ceil and floor of the same draw differ by exactly one") {
    ModelParams p{{2.0, 3.0}, {0.3, -0.1}, 0.0, {1.0, 1.0}, 2};
    auto r1 = split_stream(10, "same");
    auto r2 = split_stream(10, "same");
    const auto lo = sample_discretized_mgpd(type_a_generator(), p, r1, 10000);
    const auto hi = sample_nonstandard_mdgpd(type_a_generator(), p, r2, 10000);
    for (std::size_t k = 0; k < lo.values().size(); ++k) REQUIRE(hi.values()[k] - lo.values()[k] == 1);
  }
}

TEST_CASE("samplers are bit-identical under a fixed stream", "[samplers][property]") {
  auto a = split_stream(99, "det");
  auto b = split_stream(99, "det");
  CHECK(sample_standard_mdgpd(type_c_generator(), a, 5000) == sample_standard_mdgpd(type_c_generator(), b, 5000));
  ModelParams p{{1.5, 1.5}, {0.2, 0.2}, 0.5, {1.0, 1.0}, 2};
  CHECK(sample_nonstandard_mdgpd(type_b_generator(), p, a, 3000) ==
        sample_nonstandard_mdgpd(type_b_generator(), p, b, 3000));
  CHECK(sample_gamma_ratio_mdgpd(type_a_generator(), {2, 3}, a, 3000, 3) ==
        sample_gamma_ratio_mdgpd(type_a_generator(), {2, 3}, b, 3000, 3));
}
