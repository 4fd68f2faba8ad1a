#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <vector>

namespace mdgpd {

/// One-sample KS distance between the empirical cdf of integer data and a
/// reference cdf on the integers. Throws EmptyInput.
double ks_statistic(std::span<const std::int64_t> sample, const std::function<double(std::int64_t)>& cdf);

/// Two-sample KS distance between integer samples. Throws EmptyInput.
double ks_statistic(std::span<const std::int64_t> sample_a, std::span<const std::int64_t> sample_b);

/// Smallest sample value whose empirical cdf reaches `level`.
std::int64_t empirical_quantile(std::span<const std::int64_t> sample, double level);

struct QQPoint {
  double level;
  std::int64_t qa;
  std::int64_t qb;
};

/// Matched quantiles at levels 0.01, 0.02, ..., 0.99.
std::vector<QQPoint> qq_points(std::span<const std::int64_t> sample_a, std::span<const std::int64_t> sample_b);

/// Normalized frequency table.
std::map<std::int64_t, double> empirical_pmf(std::span<const std::int64_t> sample);

/// Total variation distance between two pmfs on the integers.
double total_variation(const std::map<std::int64_t, double>& a, const std::map<std::int64_t, double>& b);

double mean(std::span<const double> x);
double correlation(std::span<const double> x, std::span<const double> y);

}  // namespace mdgpd
