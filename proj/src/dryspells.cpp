#include "mdgpd/dryspells.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "mdgpd/io.hpp"
#include "mdgpd/metrics.hpp"
#include "mdgpd/samplers.hpp"
#include "mdgpd/spectral.hpp"

namespace mdgpd::dry {

namespace {

using std::chrono::days;

constexpr double kDryValue = 0.0;
constexpr double kWetValue = 5.0;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double tv_distance(const DeltaPmf& a, const DeltaPmf& b) {
  std::map<std::int64_t, double> pa, pb;
  for (std::size_t i = 0; i < a.size(); ++i) pa[a.support()[i]] = a.probs()[i];
  for (std::size_t i = 0; i < b.size(); ++i) pb[b.support()[i]] = b.probs()[i];
  return total_variation(pa, pb);
}

struct Candidate {
  std::int64_t overlap;
  Day start;
  std::size_t ia;
  std::size_t ib;
};

}  // namespace

Day parse_date(const std::string& text) {
  int y = 0;
  unsigned m = 0, d = 0;
  char tail = 0;
  if (text.size() != 10 || std::sscanf(text.c_str(), "%4d-%2u-%2u%c", &y, &m, &d, &tail) != 3) {
    throw Error(ErrorCode::Config, "bad date '" + text + "' (expected YYYY-MM-DD)");
  }
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!ymd.ok()) throw Error(ErrorCode::Config, "invalid calendar date '" + text + "'");
  return Day(ymd);
}

std::string format_date(Day day) {
  const std::chrono::year_month_day ymd(day);
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()));
  return buf;
}

void validate_series(const PrecipSeries& s) {
  if (s.dates.size() != s.values.size()) {
    throw Error(ErrorCode::DimensionMismatch, "station " + s.station_id + ": dates and values differ in length");
  }
  for (std::size_t i = 1; i < s.dates.size(); ++i) {
    if (!(s.dates[i - 1] < s.dates[i])) {
      throw Error(ErrorCode::MisalignedDates, "station " + s.station_id + ": dates not strictly increasing at " +
                                                  format_date(s.dates[i]));
    }
  }
  for (const auto& v : s.values) {
    if (v && !(*v >= 0.0)) throw Error(ErrorCode::InvalidArgument, "station " + s.station_id + ": negative precipitation");
  }
}

std::vector<PrecipSeries> read_precip_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::EmptySeries, path.string() + " is empty");
  const auto header = split_csv(line);
  if (header.size() != 3 || header[0] != "date" || header[1] != "station" || header[2] != "precip_mm") {
    throw Error(ErrorCode::Config, path.string() + ": header must be date,station,precip_mm");
  }
  std::vector<PrecipSeries> out;
  std::map<std::string, std::size_t> index;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != 3) throw Error(ErrorCode::Config, path.string() + ":" + std::to_string(line_no) + ": expected 3 fields");
    auto [it, inserted] = index.try_emplace(cells[1], out.size());
    if (inserted) out.push_back({cells[1], {}, {}});
    auto& s = out[it->second];
    s.dates.push_back(parse_date(cells[0]));
    if (cells[2].empty()) {
      s.values.emplace_back(std::nullopt);
    } else {
      try {
        std::size_t used = 0;
        const double v = std::stod(cells[2], &used);
        if (used != cells[2].size()) throw std::invalid_argument("trailing");
        s.values.emplace_back(v);
      } catch (const std::exception&) {
        throw Error(ErrorCode::Config, path.string() + ":" + std::to_string(line_no) + ": bad precip '" + cells[2] + "'");
      }
    }
  }
  for (const auto& s : out) validate_series(s);
  return out;
}

void write_precip_csv(const std::filesystem::path& path, const std::vector<PrecipSeries>& stations) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << "date,station,precip_mm\n";
  for (const auto& s : stations) {
    for (std::size_t i = 0; i < s.dates.size(); ++i) {
      out << format_date(s.dates[i]) << ',' << s.station_id << ',';
      if (s.values[i]) out << format_double(*s.values[i]);
      out << '\n';
    }
  }
}

std::vector<std::int64_t> SpellSet::lengths() const {
  std::vector<std::int64_t> v;
  v.reserve(spells.size());
  for (const auto& s : spells) v.push_back(s.length);
  return v;
}

SpellSet extract_spells(const PrecipSeries& series, double wet_threshold_mm) {
  validate_series(series);
  if (!(wet_threshold_mm > 0.0)) throw Error(ErrorCode::InvalidArgument, "wet threshold must be positive");
  const bool any = std::any_of(series.values.begin(), series.values.end(), [](const auto& v) { return v.has_value(); });
  if (!any) throw Error(ErrorCode::EmptySeries, "station " + series.station_id + " has no observations");
  SpellSet out;
  out.station_id = series.station_id;
  out.wet_threshold_mm = wet_threshold_mm;
  out.first_day = series.dates.front();
  out.last_day = series.dates.back();
  std::optional<Spell> run;
  Day prev{};
  for (std::size_t i = 0; i < series.dates.size(); ++i) {
    const auto& v = series.values[i];
    const bool contiguous = run && series.dates[i] == prev + days(1);
    if (run && (!contiguous || !v || *v >= wet_threshold_mm)) {
      out.spells.push_back(*run);
      run.reset();
    }
    if (v && *v < wet_threshold_mm) {
      if (!run) run = Spell{series.dates[i], 0};
      ++run->length;
    }
    prev = series.dates[i];
  }
  if (run) out.spells.push_back(*run);
  return out;
}

std::int64_t station_quantile(const SpellSet& spells, double level) {
  if (spells.spells.empty()) throw Error(ErrorCode::EmptySpellSet, "station " + spells.station_id + " has no dry spells");
  if (!(level > 0.0 && level < 1.0)) throw Error(ErrorCode::InvalidArgument, "quantile level must lie in (0, 1)");
  const auto v = spells.lengths();
  return empirical_quantile(v, level);
}

JointExceedanceSet pair_joint_exceedances(const SpellSet& a, const SpellSet& b, std::int64_t u1, std::int64_t u2,
                                          UnmatchedPolicy policy) {
  if (a.last_day < b.first_day || b.last_day < a.first_day) {
    throw Error(ErrorCode::MisalignedDates, "stations " + a.station_id + " and " + b.station_id +
                                                " have disjoint observation windows");
  }
  // Spells at one station are disjoint and sorted, so a sweep finds all overlaps.
  std::vector<Candidate> cand;
  std::vector<bool> a_overlaps(a.spells.size(), false), b_overlaps(b.spells.size(), false);
  std::size_t jb = 0;
  for (std::size_t ia = 0; ia < a.spells.size(); ++ia) {
    const auto& sa = a.spells[ia];
    while (jb < b.spells.size() && b.spells[jb].last() < sa.start) ++jb;
    for (std::size_t k = jb; k < b.spells.size() && !(sa.last() < b.spells[k].start); ++k) {
      const auto& sb = b.spells[k];
      const Day lo = std::max(sa.start, sb.start);
      const Day hi = std::min(sa.last(), sb.last());
      cand.push_back({(hi - lo).count() + 1, lo, ia, k});
      a_overlaps[ia] = b_overlaps[k] = true;
    }
  }
  // (overlap, overlap start) identifies a pair uniquely, so the order is total
  // and independent of which station comes first.
  std::sort(cand.begin(), cand.end(), [](const Candidate& x, const Candidate& y) {
    if (x.overlap != y.overlap) return x.overlap > y.overlap;
    return x.start < y.start;
  });
  std::vector<bool> a_used(a.spells.size(), false), b_used(b.spells.size(), false);
  struct Kept {
    Day when;
    std::int64_t n1, n2;
  };
  std::vector<Kept> kept;
  for (const auto& c : cand) {
    if (a_used[c.ia] || b_used[c.ib]) continue;
    a_used[c.ia] = b_used[c.ib] = true;
    const auto n1 = a.spells[c.ia].length;
    const auto n2 = b.spells[c.ib].length;
    if (n1 > u1 || n2 > u2) kept.push_back({c.start, n1, n2});
  }
  if (policy == UnmatchedPolicy::ZeroFill) {
    for (std::size_t i = 0; i < a.spells.size(); ++i) {
      if (!a_overlaps[i] && a.spells[i].length > u1) kept.push_back({a.spells[i].start, a.spells[i].length, 0});
    }
    for (std::size_t i = 0; i < b.spells.size(); ++i) {
      if (!b_overlaps[i] && b.spells[i].length > u2) kept.push_back({b.spells[i].start, 0, b.spells[i].length});
    }
  }
  std::stable_sort(kept.begin(), kept.end(), [](const Kept& x, const Kept& y) { return x.when < y.when; });
  JointExceedanceSet out;
  out.u1 = u1;
  out.u2 = u2;
  for (const auto& k : kept) {
    const std::int64_t raw[2] = {k.n1, k.n2};
    const std::int64_t exc[2] = {k.n1 - u1, k.n2 - u2};
    out.lengths.append_row(raw);
    out.exceedances.append_row(exc);
    out.dates.push_back(k.when);
  }
  return out;
}

DeltaPmf empirical_delta(const JointExceedanceSet& pairs) {
  const auto& e = pairs.exceedances;
  if (e.rows() == 0) throw Error(ErrorCode::EmptyInput, "no joint exceedances");
  std::vector<std::int64_t> d(e.rows());
  for (std::size_t r = 0; r < e.rows(); ++r) d[r] = e(r, 0) - e(r, 1);
  return DeltaPmf::from_values(d);
}

GeneratorSpec select_generator(const DeltaPmf& delta) {
  if (delta.prob_at(0) > 0.5) return type_b_generator(1.0, 0.9);
  double m = 0.0, v = 0.0;
  for (std::size_t i = 0; i < delta.size(); ++i) m += delta.probs()[i] * static_cast<double>(delta.support()[i]);
  for (std::size_t i = 0; i < delta.size(); ++i) {
    const double x = static_cast<double>(delta.support()[i]) - m;
    v += delta.probs()[i] * x * x;
  }
  // Var(Delta) = 2 lambda for type (a) and 2 lambda + 144 for the +-12 mixture.
  const auto a = type_a_generator(std::clamp(v / 2.0, 0.05, 50.0));
  const auto c = type_c_generator(std::clamp((v - 144.0) / 2.0, 0.05, 50.0));
  return tv_distance(delta, delta_pmf_from_spec(a)) <= tv_distance(delta, delta_pmf_from_spec(c)) ? a : c;
}

PipelineResult run_pipeline(const std::vector<PrecipSeries>& stations, const PipelineConfig& config,
                            const nbe::NeuralEstimator* estimator) {
  if (stations.size() < 2) throw Error(ErrorCode::DimensionTooSmall, "the pipeline needs two stations");
  PipelineResult r;
  for (std::size_t i = 0; i < 2; ++i) r.spells.push_back(extract_spells(stations[i], config.wet_threshold_mm));
  r.u1 = station_quantile(r.spells[0], config.quantile_level);
  r.u2 = station_quantile(r.spells[1], config.quantile_level);
  r.pairs = pair_joint_exceedances(r.spells[0], r.spells[1], r.u1, r.u2, config.policy);
  r.delta = empirical_delta(r.pairs);
  if (!config.generator) {
    r.generator = select_generator(r.delta);
  } else {
    switch (*config.generator) {
      case GeneratorKind::PoissonIndependent: r.generator = type_a_generator(); break;
      case GeneratorKind::PoissonCommonShock: r.generator = type_b_generator(1.0, 0.9); break;
      case GeneratorKind::PoissonShifted: r.generator = type_c_generator(1.0, false); break;
      case GeneratorKind::PoissonRandomShiftMixture: r.generator = type_c_generator(); break;
      case GeneratorKind::EmpiricalDelta:
        throw Error(ErrorCode::UnsupportedSpec, "the estimator needs a parametric generator");
    }
  }

  if (estimator) {
    r.estimator = *estimator;
  } else if (config.estimator_path) {
    r.estimator = nbe::NeuralEstimator::load(*config.estimator_path);
  } else {
    nbe::Family fam{r.generator, DiscreteModel::Mdgpd, 2};
    auto tc = config.training;
    tc.m = r.pairs.exceedances.rows();
    tc.seed = config.seed;
    r.estimator = nbe::train(fam, nbe::default_prior(r.generator.kind), tc).estimator;
    r.trained = true;
  }
  if (r.estimator.family().generator.kind != r.generator.kind) {
    throw Error(ErrorCode::Config, std::string("estimator was trained on ") +
                                       std::string(to_string(r.estimator.family().generator.kind)) +
                                       " but the data selected " + std::string(to_string(r.generator.kind)));
  }
  const auto theta = nbe::estimate(r.estimator, r.pairs.exceedances);
  auto boot = RandomStream(config.seed, "pipeline").split("bootstrap");
  r.report = nbe::parametric_bootstrap(r.estimator, theta, r.pairs.exceedances.rows(), boot, config.bootstrap);
  return r;
}

void write_pipeline_outputs(const std::filesystem::path& dir, const PipelineResult& r, std::uint64_t seed) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "spells.csv");
    if (!out) throw Error(ErrorCode::Io, "cannot write spells.csv");
    out << "station,start,length\n";
    for (const auto& set : r.spells) {
      for (const auto& s : set.spells) out << set.station_id << ',' << format_date(s.start) << ',' << s.length << '\n';
    }
  }
  write_count_csv(dir / "pairs.csv", r.pairs.exceedances, {"n1", "n2"});
  {
    std::ofstream out(dir / "delta.csv");
    out << "delta,prob\n";
    for (std::size_t i = 0; i < r.delta.size(); ++i) {
      out << r.delta.support()[i] << ',' << format_double(r.delta.probs()[i]) << '\n';
    }
  }
  nbe::write_estimates_csv(dir / "estimates.csv", r.report);
  {
    // Observed margins against a large draw from the fitted law.
    auto s = RandomStream(seed, "pipeline").split("qq");
    const auto fitted = nbe::simulate_dataset(r.estimator.family(), r.report.theta_hat, s, 100000);
    std::ofstream out(dir / "qq.csv");
    out << "level,observed1,fitted1,observed2,fitted2\n";
    const auto q1 = qq_points(r.pairs.exceedances.column(0), fitted.column(0));
    const auto q2 = qq_points(r.pairs.exceedances.column(1), fitted.column(1));
    for (std::size_t i = 0; i < q1.size(); ++i) {
      out << format_double(q1[i].level) << ',' << q1[i].qa << ',' << q1[i].qb << ',' << q2[i].qa << ',' << q2[i].qb
          << '\n';
    }
  }
}

std::vector<PrecipSeries> synthetic_stations(const nbe::Family& family, const ModelParams& theta, std::size_t events,
                                             std::int64_t u1, std::int64_t u2, RandomStream& stream,
                                             CountSample* truth) {
  if (u1 < 1 || u2 < 1) throw Error(ErrorCode::InvalidArgument, "thresholds must be positive");
  auto event_stream = stream.split("events");
  auto layout_stream = stream.split("layout");
  CountSample draws(0, std::size_t{2});
  while (draws.rows() < events) {
    const auto batch = nbe::simulate_dataset(family, theta, event_stream, events);
    for (std::size_t r = 0; r < batch.rows() && draws.rows() < events; ++r) {
      if (u1 + batch(r, 0) >= 1 && u2 + batch(r, 1) >= 1) draws.append_row(batch.row(r));
    }
  }
  constexpr std::size_t kBackgroundPerEvent = 99;
  const std::size_t blocks = events * (kBackgroundPerEvent + 1);
  // Event blocks sit at random positions among the background blocks.
  std::vector<std::size_t> order(blocks);
  for (std::size_t i = 0; i < blocks; ++i) order[i] = i;
  for (std::size_t i = blocks; i > 1; --i) std::swap(order[i - 1], order[layout_stream.index(i)]);
  std::vector<std::size_t> positions(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(events));
  std::sort(positions.begin(), positions.end());
  std::vector<std::int64_t> event_at(blocks, -1);
  for (std::size_t e = 0; e < events; ++e) event_at[positions[e]] = static_cast<std::int64_t>(e);

  std::vector<PrecipSeries> out(2);
  out[0].station_id = "station_a";
  out[1].station_id = "station_b";
  Day day = Day(std::chrono::year_month_day{std::chrono::year{1900}, std::chrono::January, std::chrono::day{1}});
  for (std::size_t blk = 0; blk < blocks; ++blk) {
    std::int64_t len[2];
    if (event_at[blk] >= 0) {
      const auto e = static_cast<std::size_t>(event_at[blk]);
      len[0] = u1 + draws(e, 0);
      len[1] = u2 + draws(e, 1);
    } else {
      len[0] = 1 + static_cast<std::int64_t>(layout_stream.index(static_cast<std::size_t>(u1)));
      len[1] = 1 + static_cast<std::int64_t>(layout_stream.index(static_cast<std::size_t>(u2)));
    }
    const std::int64_t span = std::max(len[0], len[1]) + 1;
    for (std::int64_t t = 0; t < span; ++t) {
      for (int s = 0; s < 2; ++s) {
        out[static_cast<std::size_t>(s)].dates.push_back(day);
        out[static_cast<std::size_t>(s)].values.emplace_back(t < len[s] ? kDryValue : kWetValue);
      }
      day += days(1);
    }
  }
  if (truth) *truth = draws;
  return out;
}

}  // namespace mdgpd::dry
