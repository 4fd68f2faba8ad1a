#include "mdgpd/checks.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "mdgpd/analytics.hpp"
#include "mdgpd/dryspells.hpp"
#include "mdgpd/metrics.hpp"
#include "mdgpd/samplers.hpp"
#include "mdgpd/spectral.hpp"
#include "mdgpd/study.hpp"

namespace mdgpd::checks {

namespace {

using Clock = std::chrono::steady_clock;

constexpr std::size_t kMillion = 1000000;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double x, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, x);
  return buf;
}

double geometric_cdf(std::int64_t k) { return k < 1 ? 0.0 : -std::expm1(-static_cast<double>(k)); }

std::int64_t analytic_quantile(double level, int which, const DeltaPmf& delta) {
  std::int64_t k = -1000;
  while (marginal_cdf(k, which, delta) < level) ++k;
  return k;
}

study::CaseEstimators case_estimators(const study::StudyCase& c, const Options& o) {
  return study::estimators_for(c, o.training, o.estimator_dir, o.log);
}

const study::StudyCase& study_case(const std::string& label) {
  static const auto cases = study::default_cases();
  for (const auto& c : cases) {
    if (c.label == label) return c;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown case " + label);
}

// ---- 1 ----------------------------------------------------------------------

Result geometric_max(const Options& o) {
  const auto t0 = Clock::now();
  auto rs = RandomStream(o.seed, "check-1");
  const auto n = sample_standard_mdgpd(type_a_generator(), rs, kMillion);
  std::vector<std::int64_t> mx(n.rows());
  for (std::size_t r = 0; r < n.rows(); ++r) mx[r] = std::max(n(r, 0), n(r, 1));
  const double ks = ks_statistic(mx, geometric_cdf);
  const double secs = seconds_since(t0);
  return {1, "geometric row maximum", ks < 0.005 && secs < 10.0, false, "ks=" + fmt(ks) + " (< 0.005), runtime < 10 s",
          secs};
}

// ---- 2 ----------------------------------------------------------------------

Result memorylessness(const Options& o) {
  double worst = 0.0;
  int idx = 0;
  for (const auto& spec : {type_a_generator(), type_b_generator(), type_c_generator()}) {
    auto rs = RandomStream(o.seed, "check-2").split("type", static_cast<std::uint64_t>(idx++));
    const auto col = sample_standard_mdgpd(spec, rs, kMillion).column(0);
    const auto pos = std::count_if(col.begin(), col.end(), [](auto v) { return v > 0; });
    for (int k = 1; k <= 5; ++k) {
      const auto above = std::count_if(col.begin(), col.end(), [k](auto v) { return v > k; });
      worst = std::max(worst, std::abs(static_cast<double>(above) / static_cast<double>(pos) - std::exp(-k)));
    }
  }
  return {2, "memorylessness of the margins", worst < 0.005, false, "max dev=" + fmt(worst) + " (< 0.005)", 0.0};
}

// ---- 3 ----------------------------------------------------------------------

Result pmf_oracle(const Options& o) {
  const auto delta = delta_pmf_from_spec(type_a_generator());
  CompensatedSum total;
  for (std::int64_t a = -60; a <= 80; ++a) {
    for (std::int64_t b = -60; b <= 80; ++b) total.add(joint_pmf_standard(a, b, delta));
  }
  auto rs = RandomStream(o.seed, "check-3");
  const auto n = sample_standard_mdgpd(type_a_generator(), rs, kMillion);
  constexpr int lo = -5, hi = 8, w = hi - lo + 1;
  std::vector<double> counts(w * w, 0.0);
  for (std::size_t r = 0; r < n.rows(); ++r) {
    const auto a = n(r, 0), b = n(r, 1);
    if (a >= lo && a <= hi && b >= lo && b <= hi) counts[(a - lo) * w + (b - lo)] += 1.0;
  }
  double worst = 0.0;
  for (int a = lo; a <= hi; ++a) {
    for (int b = lo; b <= hi; ++b) {
      const double freq = counts[(a - lo) * w + (b - lo)] / static_cast<double>(kMillion);
      worst = std::max(worst, std::abs(freq - joint_pmf_standard(a, b, delta)));
    }
  }
  const double err = std::abs(total.value() - 1.0);
  return {3, "joint pmf against Monte Carlo", worst < 0.003 && err < 1e-9, false,
          "max dev=" + fmt(worst) + " (< 0.003), |sum-1|=" + fmt(err, 3) + " (< 1e-9)", 0.0};
}

// ---- 4 ----------------------------------------------------------------------

Result threshold_stability(const Options& o) {
  const auto s = build_spectral(type_a_generator(), 2);
  const auto c = LinearConstraint::identity(2, {2, 2});
  constexpr int lo = -4, hi = 8, w = hi - lo + 3;  // one clip bin on each side
  std::vector<double> hist(w * w, 0.0);
  double kept = 0.0;
  const auto root = RandomStream(o.seed, "check-4");
  for (std::uint64_t chunk = 0; chunk < 10; ++chunk) {
    auto rs = root.split("chunk", chunk);
    const auto n = sample_standard_mdgpd(type_a_generator(), rs, kMillion);
    for (std::size_t r = 0; r < n.rows(); ++r) {
      if (n(r, 0) <= 2 && n(r, 1) <= 2) continue;
      const auto a = std::clamp<std::int64_t>(n(r, 0) - 2, lo - 1, hi + 1);
      const auto b = std::clamp<std::int64_t>(n(r, 1) - 2, lo - 1, hi + 1);
      hist[(a - lo + 1) * w + (b - lo + 1)] += 1.0;
      kept += 1.0;
    }
  }
  // 2-d cumulative sums give the empirical cdf on the grid.
  for (int i = 0; i < w; ++i) {
    for (int j = 0; j < w; ++j) {
      if (i > 0) hist[i * w + j] += hist[(i - 1) * w + j];
      if (j > 0) hist[i * w + j] += hist[i * w + j - 1];
      if (i > 0 && j > 0) hist[i * w + j] -= hist[(i - 1) * w + j - 1];
    }
  }
  double worst = 0.0;
  for (int a = lo; a <= hi; ++a) {
    for (int b = lo; b <= hi; ++b) {
      const std::vector<std::int64_t> k{a, b};
      const double emp = hist[(a - lo + 1) * w + (b - lo + 1)] / kept;
      worst = std::max(worst, std::abs(emp - conditional_cdf_linear(k, c, s)));
    }
  }
  return {4, "threshold stability", worst < 0.005, false,
          "max dev=" + fmt(worst) + " (< 0.005) over " + fmt(kept, 7) + " accepted of 1e7", 0.0};
}

// ---- 5 ----------------------------------------------------------------------

Result gamma_ratio(const Options& o) {
  const auto s = build_spectral(type_a_generator(), 2);
  LinearConstraint row{{{2, 1}}, {0}};
  double worst_closed = 0.0;
  for (double alpha : {0.5, 1.0, 2.0}) {
    for (double beta : {0.5, 1.0, 2.0}) {
      for (std::int64_t m : {0, 3}) {
        row.threshold_m = {m};
        for (std::int64_t l = 0; l <= 10; ++l) {
          const double closed = 1.0 - std::pow(1.0 + static_cast<double>(l) / (beta * 3.0 + static_cast<double>(m)), -alpha);
          const std::vector<std::int64_t> k{l};
          worst_closed = std::max(worst_closed, std::abs(cdf_gamma_ratio(k, row, {alpha, beta}, s) - closed));
        }
      }
    }
  }
  auto rs = RandomStream(o.seed, "check-5");
  const auto col = sample_gamma_ratio_mdgpd(type_a_generator(), {1.0, 1.0}, rs, kMillion, 1).column(0);
  double worst_mc = 0.0;
  for (std::int64_t l = 0; l <= 10; ++l) {
    const auto above = std::count_if(col.begin(), col.end(), [l](auto v) { return v > l; });
    worst_mc = std::max(worst_mc, std::abs(static_cast<double>(above) / kMillion - 1.0 / (1.0 + static_cast<double>(l))));
  }
  return {5, "gamma-ratio closed form and sampler", worst_closed < 1e-10 && worst_mc < 0.003, false,
          "closed-form dev=" + fmt(worst_closed, 3) + " (< 1e-10), survival dev=" + fmt(worst_mc) + " (< 0.003)", 0.0};
}

// ---- 6 ----------------------------------------------------------------------

Result continuity(const Options&) {
  const auto t0 = Clock::now();
  const auto disc = build_spectral(type_a_generator(), 2);
  const auto cont = build_jittered_spectral(type_a_generator(), 2);
  const std::vector<double> xi{0.2, 0.2};
  std::vector<double> sups;
  for (double sg : {1.0, 10.0, 100.0, 1000.0, 10000.0}) {
    const std::vector<double> sigma{sg, sg};
    double sup = 0.0;
    for (std::int64_t a = 1; a <= 100; ++a) {
      for (std::int64_t b = 1; b <= 100; ++b) {
        const std::vector<std::int64_t> k{a, b};
        sup = std::max(sup, std::abs(continuity_ratio(k, sigma, xi, cont, disc) - 1.0));
      }
    }
    sups.push_back(sup);
  }
  bool decreasing = true;
  for (std::size_t i = 1; i < sups.size(); ++i) decreasing = decreasing && sups[i] < sups[i - 1];
  const double secs = seconds_since(t0);
  std::string detail = "sup|R-1| =";
  for (double v : sups) detail += " " + fmt(v, 3);
  detail += " (strictly decreasing, last < 0.01, runtime < 60 s)";
  return {6, "discrete/continuous tail ratio", decreasing && sups.back() < 0.01 && secs < 60.0, false, detail, secs};
}

// ---- 7 ----------------------------------------------------------------------

Result bootstrap_consistency(const Options& o) {
  const auto delta = delta_pmf_from_spec(type_a_generator());
  auto obs_stream = RandomStream(o.seed, "check-7").split("observed");
  const auto obs = sample_standard_mdgpd(type_a_generator(), obs_stream, 10000);
  auto boot_stream = RandomStream(o.seed, "check-7").split("bootstrap");
  const auto boot = bootstrap_mdgpd(obs, boot_stream, 100000);
  double ks = 0.0;
  std::int64_t qq = 0;
  for (int which = 0; which < 2; ++which) {
    const auto col = boot.column(static_cast<std::size_t>(which));
    ks = std::max(ks, ks_statistic(col, [&](std::int64_t k) { return marginal_cdf(k, which, delta); }));
    for (int i = 1; i <= 99; ++i) {
      const double level = i / 100.0;
      qq = std::max(qq, std::abs(empirical_quantile(col, level) - analytic_quantile(level, which, delta)));
    }
  }
  return {7, "bootstrap consistency", ks < 0.02 && qq <= 1, false,
          "marginal ks=" + fmt(ks) + " (< 0.02), max Q-Q dev=" + std::to_string(qq) + " (<= 1)", 0.0};
}

// ---- 8 ----------------------------------------------------------------------

Result gradients(const Options& o) {
  double worst = 0.0;
  const auto root = RandomStream(o.seed, "check-8");
  for (std::uint64_t net = 0; net < 10; ++net) {
    auto rs = root.split("network", net);
    nbe::Architecture arch;
    arch.psi_hidden = {4 + static_cast<int>(rs.index(8)), 4 + static_cast<int>(rs.index(8))};
    arch.q = 3 + static_cast<int>(rs.index(6));
    arch.phi_hidden = {4 + static_cast<int>(rs.index(8))};
    const auto gen = net % 2 == 0 ? type_a_generator() : type_b_generator(1.0, 0.9);
    const nbe::Family fam{gen, DiscreteModel::Mdgpd, 2};
    const auto prior = nbe::default_prior(gen.kind);
    auto init = rs.split("init");
    nbe::NeuralEstimator est(fam, prior, arch, init);
    Eigen::VectorXd p = est.parameters();
    for (Eigen::Index i = 0; i < p.size(); ++i) p[i] += 0.3 * rs.normal();
    est.set_parameters(p);
    auto prior_stream = rs.split("theta");
    const auto theta = nbe::sample_prior(prior, fam, prior_stream, 2);
    auto data_stream = rs.split("data");
    const auto data = nbe::simulate_dataset(fam, theta[0], data_stream, 40);
    worst = std::max(worst, nbe::gradient_check(est, data, nbe::to_vector(theta[1])));
  }
  return {8, "backpropagation against finite differences", worst < 1e-4, false,
          "max rel dev=" + fmt(worst, 3) + " (< 1e-4) over 10 networks", 0.0};
}

// ---- 9 ----------------------------------------------------------------------

Result recovery(const Options& o) {
  const auto t0 = Clock::now();
  const auto& c = study_case("a");
  const auto est = case_estimators(c, o).mdgpd;
  const nbe::Family fam{c.generator, DiscreteModel::Mdgpd, 2};
  std::vector<double> rel[2], abs_xi[2];
  const auto root = RandomStream(o.seed, "check-9");
  for (std::uint64_t t = 0; t < 100; ++t) {
    auto rs = root.split("test-set", t);
    const auto data = nbe::simulate_dataset(fam, c.truth, rs, o.training.m);
    const auto hat = nbe::estimate(est, data);
    for (int i = 0; i < 2; ++i) {
      rel[i].push_back(study::relative_error_pct(hat.sigma[i], c.truth.sigma[i]));
      abs_xi[i].push_back(std::abs(hat.xi[i] - c.truth.xi[i]));
    }
  }
  const double secs = seconds_since(t0);
  bool ok = secs < 1800.0;
  std::string detail = "median sigma rel err %";
  for (int i = 0; i < 2; ++i) {
    const double m = nbe::percentile(rel[i], 0.5);
    ok = ok && m <= 15.0;
    detail += " " + fmt(m, 3);
  }
  detail += " (<= 15), median |xi err|";
  for (int i = 0; i < 2; ++i) {
    const double m = nbe::percentile(abs_xi[i], 0.5);
    ok = ok && m <= 0.15;
    detail += " " + fmt(m, 3);
  }
  detail += " (<= 0.15), runtime < 30 min";
  return {9, "neural estimator recovery", ok, false, detail, secs};
}

// ---- 10 ---------------------------------------------------------------------

Result table2(const Options& o) {
  bool ok = true;
  std::string detail = "MDGPD wins (ks, loglik) of 50:";
  for (const auto& c : study::default_cases()) {
    const auto est = case_estimators(c, o);
    int ks = 0, ll = 0;
    for (std::uint64_t r = 0; r < 50; ++r) {
      auto rs = RandomStream(o.seed, "check-10").split(c.label).split("rep", r);
      const auto res = study::run_case(c, est, 1000, rs);
      ks += res.mdgpd.ks < res.discretized.ks ? 1 : 0;
      ll += res.mdgpd.log_likelihood > res.discretized.log_likelihood ? 1 : 0;
    }
    ok = ok && ks >= 45 && ll >= 45;
    detail += " " + c.label + "=(" + std::to_string(ks) + "," + std::to_string(ll) + ")";
  }
  return {10, "MDGPD against discretized MGPD", ok, false, detail + " (each >= 45)", 0.0};
}

// ---- 11 ---------------------------------------------------------------------

dry::PrecipSeries series(const std::string& id, const std::vector<std::optional<double>>& values) {
  dry::PrecipSeries s;
  s.station_id = id;
  const auto first = dry::parse_date("2000-01-01");
  for (std::size_t i = 0; i < values.size(); ++i) s.dates.push_back(first + std::chrono::days(i));
  s.values = values;
  return s;
}

bool fixtures_match(std::string& detail) {
  // Hand-worked two-station example, wet threshold 1 mm.
  const auto a = dry::extract_spells(series("A", {0, 0, 0, 5, 0, 0, 2, 0, 0, 0, 0, 0, 3, 0, 0.5}));
  const auto b = dry::extract_spells(series("B", {0, 0, 4, 0, 0, 0, 0, 0, 0, 1.2, 0, 0, 0, 0, 0}));
  bool ok = a.lengths() == std::vector<std::int64_t>{3, 2, 5, 2} && b.lengths() == std::vector<std::int64_t>{2, 6, 5};
  ok = ok && dry::station_quantile(a) == 5 && dry::station_quantile(b) == 6;
  // A missing day splits a run.
  const auto gap = dry::extract_spells(series("G", {0, 0, std::nullopt, 0, 7}));
  ok = ok && gap.lengths() == std::vector<std::int64_t>{2, 1};
  // Lengths 1..100 have 99 as their 0.99 quantile.
  std::vector<std::optional<double>> ramp;
  for (int len = 1; len <= 100; ++len) {
    ramp.insert(ramp.end(), static_cast<std::size_t>(len), 0.0);
    ramp.emplace_back(9.0);
  }
  ok = ok && dry::station_quantile(dry::extract_spells(series("R", ramp))) == 99;
  // All overlaps have length 2, so ties resolve by overlap start: (A1,B1),
  // (A2,B2), (A3,B3); A4 is left over and does not exceed u1.
  const auto pairs = dry::pair_joint_exceedances(a, b, 2, 4);
  ok = ok && pairs.lengths == CountSample(2, {3, 2, 2, 6, 5, 5});
  ok = ok && pairs.exceedances == CountSample(2, {1, -2, 0, 2, 3, 1});
  const auto delta = dry::empirical_delta(pairs);
  ok = ok && delta == DeltaPmf({-2, 2, 3}, {1.0 / 3, 1.0 / 3, 1.0 / 3});
  detail = ok ? "fixtures exact" : "fixture mismatch";
  return ok;
}

Result dry_spells(const Options& o) {
  const auto t0 = Clock::now();
  std::string detail;
  bool ok = fixtures_match(detail);
  if (!o.full) return {11, "dry-spell extraction and pipeline", ok, false, detail + "; coverage skipped", seconds_since(t0)};

  const auto& c = study_case("b");
  const auto est = case_estimators(c, o).mdgpd;
  const nbe::Family fam{c.generator, DiscreteModel::Mdgpd, 2};
  int covered[2] = {0, 0};
  int selected = 0;
  const auto root = RandomStream(o.seed, "check-11");
  for (std::uint64_t t = 0; t < 50; ++t) {
    auto rs = root.split("trial", t);
    const auto stations = dry::synthetic_stations(fam, c.truth, o.training.m, 8, 8, rs);
    dry::PipelineConfig cfg;
    cfg.seed = mix64(o.seed + t);
    const auto r = dry::run_pipeline(stations, cfg, &est);
    selected += r.generator.kind == c.generator.kind ? 1 : 0;
    for (int i = 0; i < 2; ++i) {
      const auto idx = static_cast<std::size_t>(i);
      covered[i] += (r.report.ci_lower[idx] <= c.truth.sigma[idx] && c.truth.sigma[idx] <= r.report.ci_upper[idx]) ? 1 : 0;
    }
  }
  ok = ok && covered[0] >= 45 && covered[1] >= 45;
  detail += "; sigma coverage " + std::to_string(covered[0]) + "/50, " + std::to_string(covered[1]) +
            "/50 (>= 45 each), common shock selected " + std::to_string(selected) + "/50";
  return {11, "dry-spell extraction and pipeline", ok, false, detail, seconds_since(t0)};
}

}  // namespace

Result run_check(int id, const Options& options) {
  const auto t0 = Clock::now();
  Result r;
  const bool heavy = id == 9 || id == 10;
  if (heavy && !options.full) {
    r.id = id;
    r.title = id == 9 ? "neural estimator recovery" : "MDGPD against discretized MGPD";
    r.passed = true;
    r.skipped = true;
    r.detail = "needs training; run with the full suite";
    return r;
  }
  try {
    switch (id) {
      case 1: r = geometric_max(options); break;
      case 2: r = memorylessness(options); break;
      case 3: r = pmf_oracle(options); break;
      case 4: r = threshold_stability(options); break;
      case 5: r = gamma_ratio(options); break;
      case 6: r = continuity(options); break;
      case 7: r = bootstrap_consistency(options); break;
      case 8: r = gradients(options); break;
      case 9: r = recovery(options); break;
      case 10: r = table2(options); break;
      case 11: r = dry_spells(options); break;
      default: throw Error(ErrorCode::InvalidArgument, "no check numbered " + std::to_string(id));
    }
  } catch (const Error& e) {
    r.id = id;
    r.title = "check " + std::to_string(id);
    r.passed = false;
    r.detail = std::string("error: ") + e.what();
  }
  if (r.seconds == 0.0) r.seconds = seconds_since(t0);
  return r;
}

std::vector<Result> run_all(const Options& options, const std::function<void(const Result&)>& on_result) {
  std::vector<Result> out;
  for (int id = 1; id <= kCheckCount; ++id) {
    out.push_back(run_check(id, options));
    if (on_result) on_result(out.back());
  }
  return out;
}

std::string format_result(const Result& r) {
  std::ostringstream os;
  os << (r.skipped ? "SKIP" : r.passed ? "PASS" : "FAIL") << "  " << r.id << "  " << r.title << ": " << r.detail
     << " (" << fmt(r.seconds, 3) << " s)";
  return os.str();
}

}  // namespace mdgpd::checks
