#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mdgpd/dryspells.hpp"
#include "mdgpd/spectral.hpp"

using namespace mdgpd;
using namespace mdgpd::dry;

namespace {

using Values = std::vector<std::optional<double>>;

PrecipSeries series(const std::string& id, const Values& values, const std::string& first = "2000-01-01") {
  PrecipSeries s;
  s.station_id = id;
  const auto d0 = parse_date(first);
  for (std::size_t i = 0; i < values.size(); ++i) s.dates.push_back(d0 + std::chrono::days(i));
  s.values = values;
  return s;
}

// `len` dry days followed by one wet day.
void add_run(Values& v, int len) {
  v.insert(v.end(), static_cast<std::size_t>(len), 0.0);
  v.emplace_back(5.0);
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

const Values kA{0, 0, 0, 5, 0, 0, 2, 0, 0, 0, 0, 0, 3, 0, 0.5};
const Values kB{0, 0, 4, 0, 0, 0, 0, 0, 0, 1.2, 0, 0, 0, 0, 0};

}  // namespace

TEST_CASE("dates", "[dryspells]") {
  CHECK(format_date(parse_date("2024-02-29")) == "2024-02-29");
  CHECK((parse_date("2000-03-01") - parse_date("2000-02-28")).count() == 2);
  CHECK_THROWS_AS(parse_date("2023-02-29"), Error);
  CHECK_THROWS_AS(parse_date("01/02/2000"), Error);
}

TEST_CASE("spell extraction examples", "[dryspells]") {
  CHECK(extract_spells(series("s", {0, 0, 0, 2, 0, 0})).lengths() == std::vector<std::int64_t>{3, 2});
  CHECK(extract_spells(series("s", {1, 2, 3})).spells.empty());
  CHECK(extract_spells(series("s", {0.5, std::nullopt, 0.5})).lengths() == std::vector<std::int64_t>{1, 1});
  CHECK(extract_spells(series("A", kA)).lengths() == std::vector<std::int64_t>{3, 2, 5, 2});
  CHECK(extract_spells(series("B", kB)).lengths() == std::vector<std::int64_t>{2, 6, 5});
  // The threshold is strict: exactly 1 mm is wet.
  CHECK(extract_spells(series("s", {0.99, 1.0, 0.0})).lengths() == std::vector<std::int64_t>{1, 1});
  CHECK(extract_spells(series("s", {0, 0, 2}), 3.0).lengths() == std::vector<std::int64_t>{3});
}

TEST_CASE("a gap in the dates ends a run", "[dryspells]") {
  auto s = series("s", {0, 0, 0, 0});
  s.dates[2] += std::chrono::days(5);
  s.dates[3] += std::chrono::days(5);
  CHECK(extract_spells(s).lengths() == std::vector<std::int64_t>{2, 2});
}

TEST_CASE("spells are maximal and reconstruct the dry mask", "[dryspells][property]") {
  auto rs = split_stream(7, "mask");
  for (int trial = 0; trial < 50; ++trial) {
    Values v;
    for (int i = 0; i < 200; ++i) {
      const double u = rs.uniform01();
      v.push_back(u < 0.05 ? std::nullopt : std::optional<double>(u < 0.6 ? 0.0 : 3.0 * u));
    }
    const auto s = series("m", v);
    const auto set = extract_spells(s);
    std::vector<bool> dry(v.size(), false);
    for (const auto& sp : set.spells) {
      const auto first = static_cast<std::size_t>((sp.start - s.dates.front()).count());
      const auto last = first + static_cast<std::size_t>(sp.length) - 1;
      REQUIRE(last < v.size());
      for (auto i = first; i <= last; ++i) {
        REQUIRE_FALSE(dry[i]);
        dry[i] = true;
      }
      if (first > 0) CHECK((!v[first - 1] || *v[first - 1] >= 1.0));
      if (last + 1 < v.size()) CHECK((!v[last + 1] || *v[last + 1] >= 1.0));
    }
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(dry[i] == (v[i] && *v[i] < 1.0));
  }
}

TEST_CASE("extraction errors", "[dryspells]") {
  CHECK_THROWS_AS(extract_spells(series("e", {})), Error);
  try {
    extract_spells(series("station-7", {std::nullopt, std::nullopt}));
    FAIL("expected EmptySeries");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptySeries);
    CHECK(std::string(e.what()).find("station-7") != std::string::npos);
  }
  auto bad = series("s", {0, 0});
  bad.dates[1] = bad.dates[0];
  CHECK_THROWS_AS(validate_series(bad), Error);
  auto neg = series("s", {0, -1});
  CHECK_THROWS_AS(validate_series(neg), Error);
}

TEST_CASE("station quantile", "[dryspells]") {
  Values ramp;
  for (int len = 1; len <= 100; ++len) add_run(ramp, len);
  const auto set = extract_spells(series("r", ramp));
  CHECK(station_quantile(set, 0.99) == 99);
  CHECK(station_quantile(set, 0.5) == 50);
  CHECK(station_quantile(set, 0.995) == 100);
  CHECK_THROWS_AS(station_quantile(set, 1.0), Error);
  std::int64_t prev = 0;
  for (double level = 0.01; level < 1.0; level += 0.01) {
    const auto q = station_quantile(set, level);
    CHECK(q >= prev);
    prev = q;
  }
  Values constant;
  for (int i = 0; i < 10; ++i) add_run(constant, 4);
  const auto c = extract_spells(series("c", constant));
  for (double level : {0.01, 0.5, 0.99}) CHECK(station_quantile(c, level) == 4);
  CHECK(station_quantile(extract_spells(series("A", kA))) == 5);
  CHECK(station_quantile(extract_spells(series("B", kB))) == 6);
  CHECK_THROWS_AS(station_quantile(extract_spells(series("w", {3, 3}))), Error);
  CHECK_THROWS_AS(station_quantile(set, 0.0), Error);
}

TEST_CASE("pairing examples", "[dryspells]") {
  const auto a = extract_spells(series("A", kA));
  const auto b = extract_spells(series("B", kB));

  SECTION("identical stations pair with themselves") {
    const auto p = pair_joint_exceedances(a, a, 0, 0);
    CHECK(p.lengths == CountSample(2, {3, 3, 2, 2, 5, 5, 2, 2}));
    CHECK(p.exceedances == p.lengths);
  }
  SECTION("hand-worked example") {
    const auto p = pair_joint_exceedances(a, b, 2, 4);
    CHECK(p.lengths == CountSample(2, {3, 2, 2, 6, 5, 5}));
    CHECK(p.exceedances == CountSample(2, {1, -2, 0, 2, 3, 1}));
    CHECK(format_date(p.dates[0]) == "2000-01-01");
    CHECK(empirical_delta(p) == DeltaPmf({-2, 2, 3}, {1.0 / 3, 1.0 / 3, 1.0 / 3}));
  }
  SECTION("a 20-day spell against a 19-day spell") {
    Values x, y;
    x.emplace_back(5.0);
    y.emplace_back(5.0);
    x.insert(x.end(), 20, 0.0);
    y.emplace_back(5.0);
    y.insert(y.end(), 19, 0.0);
    x.emplace_back(5.0);
    y.emplace_back(5.0);
    const auto p = pair_joint_exceedances(extract_spells(series("x", x)), extract_spells(series("y", y)), 17, 18);
    CHECK(p.lengths == CountSample(2, {20, 19}));
    CHECK(p.exceedances == CountSample(2, {3, 1}));
  }
  SECTION("no overlap leaves nothing under Drop") {
    const auto x = extract_spells(series("x", {0, 0, 0, 5, 5, 5, 5}));
    const auto y = extract_spells(series("y", {5, 5, 5, 5, 0, 0, 0}));
    CHECK(pair_joint_exceedances(x, y, 1, 1).exceedances.rows() == 0);
    const auto z = pair_joint_exceedances(x, y, 1, 1, UnmatchedPolicy::ZeroFill);
    CHECK(z.lengths == CountSample(2, {3, 0, 0, 3}));
    CHECK(z.exceedances == CountSample(2, {2, -1, -1, 2}));
  }
  SECTION("ZeroFill leaves overlapping but unmatched spells out") {
    // y's one spell overlaps both spells of x; the larger overlap wins.
    const auto x = extract_spells(series("x", {0, 0, 5, 0, 0, 0, 5}));
    const auto y = extract_spells(series("y", {0, 0, 0, 0, 0, 0, 5}));
    CHECK(pair_joint_exceedances(x, y, 0, 0, UnmatchedPolicy::ZeroFill).lengths == CountSample(2, {3, 6}));
  }
  SECTION("disjoint observation windows") {
    const auto late = extract_spells(series("late", {0, 0}, "2010-01-01"));
    try {
      pair_joint_exceedances(a, late, 1, 1);
      FAIL("expected MisalignedDates");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::MisalignedDates);
    }
  }
}

TEST_CASE("swapping the stations swaps the pairs and negates Delta", "[dryspells][property]") {
  auto rs = split_stream(8, "symmetry");
  for (int trial = 0; trial < 30; ++trial) {
    Values x, y;
    for (int i = 0; i < 300; ++i) {
      x.emplace_back(rs.uniform01() < 0.75 ? 0.0 : 4.0);
      y.emplace_back(rs.uniform01() < 0.75 ? 0.0 : 4.0);
    }
    const auto sx = extract_spells(series("x", x));
    const auto sy = extract_spells(series("y", y));
    for (auto policy : {UnmatchedPolicy::Drop, UnmatchedPolicy::ZeroFill}) {
      const auto p = pair_joint_exceedances(sx, sy, 2, 3, policy);
      const auto q = pair_joint_exceedances(sy, sx, 3, 2, policy);
      REQUIRE(p.lengths.rows() == q.lengths.rows());
      for (std::size_t r = 0; r < p.lengths.rows(); ++r) {
        CHECK(p.lengths(r, 0) == q.lengths(r, 1));
        CHECK(p.lengths(r, 1) == q.lengths(r, 0));
        CHECK((p.exceedances(r, 0) > 0 || p.exceedances(r, 1) > 0));
      }
      if (p.lengths.rows() > 0) CHECK(empirical_delta(p) == empirical_delta(q).negated());
    }
  }
}

TEST_CASE("empirical Delta", "[dryspells]") {
  JointExceedanceSet s;
  s.exceedances = CountSample(2, {3, 1, 1, 3});
  CHECK(empirical_delta(s) == DeltaPmf({-2, 2}, {0.5, 0.5}));
  s.exceedances = CountSample(2, {4, 4, 0, 0, 7, 7});
  CHECK(empirical_delta(s) == DeltaPmf::point_mass(0));
  s.exceedances = CountSample(0, 2);
  CHECK_THROWS_AS(empirical_delta(s), Error);
}

TEST_CASE("generator selection", "[dryspells]") {
  CHECK(select_generator(DeltaPmf({-1, 0, 1}, {0.2, 0.6, 0.2})).kind == GeneratorKind::PoissonCommonShock);
  CHECK(select_generator(delta_pmf_from_spec(type_a_generator(1.0))).kind == GeneratorKind::PoissonIndependent);
  CHECK(select_generator(delta_pmf_from_spec(type_a_generator(3.0))).kind == GeneratorKind::PoissonIndependent);
  CHECK(select_generator(delta_pmf_from_spec(type_c_generator(1.0))).kind == GeneratorKind::PoissonRandomShiftMixture);
}

TEST_CASE("precipitation CSV", "[dryspells][io]") {
  const auto dir = std::filesystem::temp_directory_path() / "mdgpd_test_dryspells";
  std::filesystem::create_directories(dir);
  const auto path = dir / "precip.csv";
  const std::vector<PrecipSeries> in{series("A", {0, std::nullopt, 2.5}), series("B", {1, 0, 0})};
  write_precip_csv(path, in);
  const auto out = read_precip_csv(path);
  REQUIRE(out.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(out[i].station_id == in[i].station_id);
    CHECK(out[i].dates == in[i].dates);
    CHECK(out[i].values == in[i].values);
  }
  {
    std::ofstream f(path);
    f << "date,station,precip_mm\n2000-01-01,A,x\n";
  }
  CHECK_THROWS_AS(read_precip_csv(path), Error);
  {
    std::ofstream f(path);
  }
  try {
    read_precip_csv(path);
    FAIL("expected EmptySeries");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptySeries);
  }
  CHECK_THROWS_AS(read_precip_csv(dir / "missing.csv"), Error);
}

TEST_CASE("synthetic stations embed the requested events", "[dryspells]") {
  const nbe::Family fam{type_b_generator(1.0, 0.9), DiscreteModel::Mdgpd, 2};
  const ModelParams theta{{2.0, 2.0}, {-0.1, -0.1}, 0.9, {1.0, 1.0}, 2};
  auto rs = split_stream(9, "synthetic");
  CountSample truth(0, 2);
  const auto st = synthetic_stations(fam, theta, 60, 8, 8, rs, &truth);
  const auto a = extract_spells(st[0]);
  const auto b = extract_spells(st[1]);
  CHECK(station_quantile(a) == 8);
  CHECK(station_quantile(b) == 8);
  const auto p = pair_joint_exceedances(a, b, 8, 8);
  CHECK(p.exceedances == truth);
  CHECK(truth.rows() == 60);
}

TEST_CASE("pipeline is deterministic and writes its outputs", "[dryspells][pipeline]") {
  const nbe::Family fam{type_a_generator(), DiscreteModel::Mdgpd, 2};
  const ModelParams theta{{2.0, 2.0}, {0.1, 0.1}, 0.0, {1.0, 1.0}, 2};
  auto rs = split_stream(10, "pipeline");
  const auto stations = synthetic_stations(fam, theta, 80, 6, 6, rs);
  PipelineConfig cfg;
  cfg.generator = GeneratorKind::PoissonIndependent;
  cfg.training.k = 64;
  cfg.training.epochs = 2;
  cfg.training.holdout = 16;
  cfg.bootstrap = 20;
  cfg.seed = 5;
  const auto root = std::filesystem::temp_directory_path() / "mdgpd_test_pipeline";
  std::filesystem::remove_all(root);
  for (const char* run : {"one", "two"}) {
    const auto r = run_pipeline(stations, cfg);
    CHECK(r.trained);
    CHECK(r.u1 == 6);
    CHECK(r.pairs.exceedances.rows() == 80);
    write_pipeline_outputs(root / run, r, cfg.seed);
  }
  for (const char* f : {"spells.csv", "pairs.csv", "delta.csv", "estimates.csv", "qq.csv"}) {
    INFO(f);
    const auto one = slurp(root / "one" / f);
    CHECK_FALSE(one.empty());
    CHECK(one == slurp(root / "two" / f));
  }
  const auto est = slurp(root / "one" / "estimates.csv");
  CHECK(est.rfind("param,estimate,ci_lo,ci_hi,rmse\n", 0) == 0);
  CHECK(std::count(est.begin(), est.end(), '\n') == 8);

  auto wrong = cfg;
  wrong.generator = GeneratorKind::EmpiricalDelta;
  CHECK_THROWS_AS(run_pipeline(stations, wrong), Error);
  CHECK_THROWS_AS(run_pipeline({stations[0]}, cfg), Error);
}
