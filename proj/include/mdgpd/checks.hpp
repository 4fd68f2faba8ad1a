#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mdgpd/nbe.hpp"

namespace mdgpd::checks {

/// Numbered end-to-end property checks shared by the acceptance binary and
/// `mdgpd selftest`.
struct Options {
  /// false skips the training-based checks (9, 10 and the pipeline coverage
  /// half of 11).
  bool full = true;
  /// Cache for trained estimators; reused across runs when set.
  std::optional<std::filesystem::path> estimator_dir;
  nbe::TrainingConfig training;
  std::uint64_t seed = 2024;
  std::function<void(const std::string&)> log;
};

struct Result {
  int id = 0;
  std::string title;
  bool passed = false;
  bool skipped = false;
  std::string detail;
  double seconds = 0.0;
};

inline constexpr int kCheckCount = 11;

Result run_check(int id, const Options& options);
/// Runs 1..kCheckCount in order; `on_result` sees each result as it finishes.
std::vector<Result> run_all(const Options& options, const std::function<void(const Result&)>& on_result = {});

/// "PASS  3  <title>: <detail> (1.2 s)".
std::string format_result(const Result& r);

}  // namespace mdgpd::checks
