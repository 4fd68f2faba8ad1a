#include "mdgpd/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "mdgpd/core.hpp"

namespace mdgpd {

namespace {

std::vector<std::int64_t> sorted_copy(std::span<const std::int64_t> x) {
  if (x.empty()) throw Error(ErrorCode::EmptyInput, "sample is empty");
  std::vector<std::int64_t> v(x.begin(), x.end());
  std::sort(v.begin(), v.end());
  return v;
}

double ecdf(const std::vector<std::int64_t>& sorted, std::int64_t x) {
  const auto it = std::upper_bound(sorted.begin(), sorted.end(), x);
  return static_cast<double>(it - sorted.begin()) / static_cast<double>(sorted.size());
}

}  // namespace

double ks_statistic(std::span<const std::int64_t> sample, const std::function<double(std::int64_t)>& cdf) {
  const auto v = sorted_copy(sample);
  // Both cdfs are right-continuous step functions on the integers; between
  // consecutive sample values the empirical cdf is flat, so checking each
  // observed value and its predecessor covers the supremum.
  double d = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i > 0 && v[i] == v[i - 1]) continue;
    const double below = static_cast<double>(i) / static_cast<double>(v.size());
    d = std::max(d, std::abs(below - cdf(v[i] - 1)));
    d = std::max(d, std::abs(ecdf(v, v[i]) - cdf(v[i])));
  }
  return std::min(d, 1.0);
}

double ks_statistic(std::span<const std::int64_t> sample_a, std::span<const std::int64_t> sample_b) {
  const auto a = sorted_copy(sample_a);
  const auto b = sorted_copy(sample_b);
  std::vector<std::int64_t> pts(a);
  pts.insert(pts.end(), b.begin(), b.end());
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  double d = 0.0;
  for (auto x : pts) d = std::max(d, std::abs(ecdf(a, x) - ecdf(b, x)));
  return d;
}

std::int64_t empirical_quantile(std::span<const std::int64_t> sample, double level) {
  const auto v = sorted_copy(sample);
  const double n = static_cast<double>(v.size());
  // Smallest index i with (i + 1) / n >= level; a relative tolerance absorbs
  // rounding in level * n.
  auto idx = static_cast<std::size_t>(std::max(0.0, std::ceil(level * n - 1e-9 * n) - 1.0));
  idx = std::min(idx, v.size() - 1);
  return v[idx];
}

std::vector<QQPoint> qq_points(std::span<const std::int64_t> sample_a, std::span<const std::int64_t> sample_b) {
  if (sample_a.empty() || sample_b.empty()) throw Error(ErrorCode::EmptyInput, "Q-Q needs two nonempty samples");
  std::vector<QQPoint> out;
  for (int i = 1; i <= 99; ++i) {
    const double level = i / 100.0;
    out.push_back({level, empirical_quantile(sample_a, level), empirical_quantile(sample_b, level)});
  }
  return out;
}

std::map<std::int64_t, double> empirical_pmf(std::span<const std::int64_t> sample) {
  if (sample.empty()) throw Error(ErrorCode::EmptyInput, "sample is empty");
  std::map<std::int64_t, double> out;
  for (auto v : sample) out[v] += 1.0;
  for (auto& [k, p] : out) p /= static_cast<double>(sample.size());
  return out;
}

double total_variation(const std::map<std::int64_t, double>& a, const std::map<std::int64_t, double>& b) {
  CompensatedSum acc;
  for (const auto& [k, p] : a) {
    const auto it = b.find(k);
    acc.add(std::abs(p - (it == b.end() ? 0.0 : it->second)));
  }
  for (const auto& [k, p] : b) {
    if (!a.contains(k)) acc.add(p);
  }
  return 0.5 * acc.value();
}

double mean(std::span<const double> x) {
  if (x.empty()) throw Error(ErrorCode::EmptyInput, "mean of empty sequence");
  CompensatedSum acc;
  for (double v : x) acc.add(v);
  return acc.value() / static_cast<double>(x.size());
}

double correlation(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(ErrorCode::DimensionMismatch, "correlation needs equal lengths");
  const double mx = mean(x);
  const double my = mean(y);
  CompensatedSum sxy, sxx, syy;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy.add((x[i] - mx) * (y[i] - my));
    sxx.add((x[i] - mx) * (x[i] - mx));
    syy.add((y[i] - my) * (y[i] - my));
  }
  const double den = std::sqrt(sxx.value() * syy.value());
  return den > 0.0 ? sxy.value() / den : 0.0;
}

}  // namespace mdgpd
