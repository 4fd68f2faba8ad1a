#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mdgpd/core.hpp"
#include "mdgpd/nbe.hpp"
#include "mdgpd/random.hpp"

namespace mdgpd::dry {

using Day = std::chrono::sys_days;

/// "YYYY-MM-DD"; throws Config on anything else.
Day parse_date(const std::string& text);
std::string format_date(Day day);

/// Daily record of one station; std::nullopt marks a missing day.
struct PrecipSeries {
  std::string station_id;
  std::vector<Day> dates;
  std::vector<std::optional<double>> values;
};

void validate_series(const PrecipSeries& series);

/// Reads `date,station,precip_mm` rows (empty precip = missing), one series
/// per station in order of first appearance.
std::vector<PrecipSeries> read_precip_csv(const std::filesystem::path& path);
void write_precip_csv(const std::filesystem::path& path, const std::vector<PrecipSeries>& stations);

struct Spell {
  Day start;
  std::int64_t length = 0;
  [[nodiscard]] Day last() const { return start + std::chrono::days(length - 1); }
};

struct SpellSet {
  std::string station_id;
  double wet_threshold_mm = 1.0;
  Day first_day{};
  Day last_day{};
  std::vector<Spell> spells;
  [[nodiscard]] std::vector<std::int64_t> lengths() const;
};

/// Maximal runs of consecutive calendar days with value < threshold. Missing
/// values and gaps in the date sequence end a run. Throws EmptySeries.
SpellSet extract_spells(const PrecipSeries& series, double wet_threshold_mm = 1.0);

/// Smallest length L with empirical cdf(L) >= level. Throws EmptySpellSet.
std::int64_t station_quantile(const SpellSet& spells, double level = 0.99);

enum class UnmatchedPolicy { Drop, ZeroFill };

/// Pairs stored both as raw lengths and as exceedances (length - threshold).
struct JointExceedanceSet {
  std::int64_t u1 = 0;
  std::int64_t u2 = 0;
  CountSample lengths{0, 2};
  CountSample exceedances{0, 2};
  std::vector<Day> dates;  // first day of the overlap (or of the lone spell)
};

/// Greedy matching of overlapping spells by largest overlap, ties to the
/// earlier overlap start; a pair is kept iff n1 > u1 or n2 > u2. Under
/// ZeroFill an unmatched qualifying spell with no overlapping spell at the
/// other station pairs with length 0. Throws MisalignedDates when the two
/// observation windows are disjoint.
JointExceedanceSet pair_joint_exceedances(const SpellSet& a, const SpellSet& b, std::int64_t u1, std::int64_t u2,
                                          UnmatchedPolicy policy = UnmatchedPolicy::Drop);

/// Law of N1 - N2 over the stored exceedance pairs. Throws EmptyInput.
DeltaPmf empirical_delta(const JointExceedanceSet& pairs);

/// Common shock when Delta puts more than half its mass at 0; otherwise the
/// closer (total variation) of a moment-matched type (a) or type (c) law.
GeneratorSpec select_generator(const DeltaPmf& delta);

struct PipelineConfig {
  double wet_threshold_mm = 1.0;
  double quantile_level = 0.99;
  UnmatchedPolicy policy = UnmatchedPolicy::Drop;
  std::optional<GeneratorKind> generator;  // automatic selection when empty
  std::optional<std::filesystem::path> estimator_path;
  nbe::TrainingConfig training;
  std::size_t bootstrap = 200;
  std::uint64_t seed = 1;
};

struct PipelineResult {
  std::vector<SpellSet> spells;  // two stations
  std::int64_t u1 = 0;
  std::int64_t u2 = 0;
  JointExceedanceSet pairs;
  DeltaPmf delta = DeltaPmf::point_mass(0);
  GeneratorSpec generator;
  nbe::NeuralEstimator estimator;
  nbe::EstimateReport report;
  bool trained = false;
};

/// Extraction, thresholds, pairing, Delta, generator choice, estimation and
/// bootstrap on the first two stations. The estimator is either supplied,
/// loaded from config.estimator_path, or trained on the chosen family.
PipelineResult run_pipeline(const std::vector<PrecipSeries>& stations, const PipelineConfig& config,
                            const nbe::NeuralEstimator* estimator = nullptr);

/// Writes spells.csv, pairs.csv, delta.csv, estimates.csv and qq.csv.
void write_pipeline_outputs(const std::filesystem::path& dir, const PipelineResult& result, std::uint64_t seed);

/// Two stations whose joint exceedances over (u1, u2) are exactly `events`
/// draws of the family at theta (redrawn when a length would not be
/// positive), embedded among 99 background blocks per event with lengths
/// uniform on 1..u so that the 0.99 quantile at each station is u.
std::vector<PrecipSeries> synthetic_stations(const nbe::Family& family, const ModelParams& theta, std::size_t events,
                                             std::int64_t u1, std::int64_t u2, RandomStream& stream,
                                             CountSample* truth = nullptr);

}  // namespace mdgpd::dry
