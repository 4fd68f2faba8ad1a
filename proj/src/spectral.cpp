#include "mdgpd/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace mdgpd {

SpectralPmf::SpectralPmf(int dim, std::vector<double> points, std::vector<double> probs)
    : dim_(dim), points_(std::move(points)), probs_(std::move(probs)) {
  if (dim_ < 1) throw Error(ErrorCode::InvalidArgument, "spectral dimension must be positive");
  const auto d = static_cast<std::size_t>(dim_);
  if (probs_.empty() || points_.size() != probs_.size() * d) {
    throw Error(ErrorCode::InvalidPmf, "spectral support and probabilities disagree in size");
  }
  CompensatedSum total;
  for (std::size_t i = 0; i < probs_.size(); ++i) {
    const auto p = point(i);
    if (*std::max_element(p.begin(), p.end()) != 0.0) {
      throw Error(ErrorCode::InvalidPmf, "spectral point " + std::to_string(i) + " does not have maximum 0");
    }
    if (!(probs_[i] >= 0.0)) throw Error(ErrorCode::InvalidPmf, "negative spectral probability");
    total.add(probs_[i]);
  }
  if (std::abs(total.value() - 1.0) > 1e-12) throw Error(ErrorCode::InvalidPmf, "spectral probabilities do not sum to 1");
}

SpectralPmf SpectralPmf::from_weights(int dim, const std::map<std::vector<double>, double>& weights) {
  CompensatedSum total;
  for (const auto& [pt, w] : weights) total.add(w);
  if (!(total.value() > 0.0)) throw Error(ErrorCode::EmptyInput, "no positive spectral weight");
  std::vector<double> points;
  std::vector<double> probs;
  for (const auto& [pt, w] : weights) {
    if (w <= 0.0) continue;
    points.insert(points.end(), pt.begin(), pt.end());
    probs.push_back(w / total.value());
  }
  CompensatedSum check;
  for (double p : probs) check.add(p);
  *std::max_element(probs.begin(), probs.end()) += 1.0 - check.value();
  return SpectralPmf(dim, std::move(points), std::move(probs));
}

bool SpectralPmf::integer_valued() const {
  return std::all_of(points_.begin(), points_.end(), [](double v) { return v == std::floor(v); });
}

std::vector<double> truncated_poisson(double rate) {
  if (!(rate > 0.0) || !std::isfinite(rate)) throw Error(ErrorCode::InvalidArgument, "Poisson rate must be positive");
  std::vector<double> pmf;
  double log_p = -rate;
  double cdf = 0.0;
  for (std::size_t k = 0;; ++k) {
    if (k > 0) log_p += std::log(rate) - std::log(static_cast<double>(k));
    const double p = std::exp(log_p);
    pmf.push_back(p);
    cdf += p;
    if (static_cast<double>(k) > rate && 1.0 - cdf < kTailMass) break;
  }
  CompensatedSum total;
  for (double p : pmf) total.add(p);
  for (double& p : pmf) p /= total.value();
  return pmf;
}

SpectralPmf degenerate_spectral(int d) {
  return SpectralPmf(d, std::vector<double>(static_cast<std::size_t>(d), 0.0), {1.0});
}

namespace {

using Weights = std::map<std::vector<double>, double>;

// Adds the law of (U + shift + jitter) - max(...) with weight `scale`, where U
// has independent coordinates with the given marginal pmfs.
void accumulate(const std::vector<std::vector<double>>& marginals, const std::vector<double>& shift,
                const std::vector<double>& jitter, double scale, Weights& out) {
  const std::size_t d = marginals.size();
  std::vector<double> t(d);
  std::vector<double> s(d);
  std::function<void(std::size_t, double)> rec = [&](std::size_t i, double w) {
    if (i == d) {
      const double mx = *std::max_element(t.begin(), t.end());
      for (std::size_t j = 0; j < d; ++j) s[j] = t[j] - mx;
      out[s] += w * scale;
      return;
    }
    const auto& pmf = marginals[i];
    const double wj = 1.0 / static_cast<double>(jitter.size());
    for (std::size_t k = 0; k < pmf.size(); ++k) {
      for (double j : jitter) {
        t[i] = static_cast<double>(k) + shift[i] + j;
        rec(i + 1, w * pmf[k] * wj);
      }
    }
  };
  rec(0, 1.0);
}

Weights generator_weights(const GeneratorSpec& spec, int d, const std::vector<double>& jitter) {
  Weights w;
  if (spec.kind == GeneratorKind::EmpiricalDelta) {
    if (d != 2) throw Error(ErrorCode::DimensionMismatch, "empirical_delta is bivariate");
    const auto& pmf = *spec.delta_pmf;
    // T = (Delta, 0): each atom enters as a shift of a point mass.
    const std::vector<std::vector<double>> point{{1.0}, {1.0}};
    for (std::size_t i = 0; i < pmf.size(); ++i) {
      accumulate(point, {static_cast<double>(pmf.support()[i]), 0.0}, jitter, pmf.probs()[i], w);
    }
    return w;
  }
  const auto full = broadcast_spec(spec, d);
  validate_spec(full);
  const double c = full.common_rate();
  std::vector<std::vector<double>> marginals;
  for (double r : full.rates) marginals.push_back(truncated_poisson(r - c));
  auto shift_vec = [&](bool reversed) {
    std::vector<double> v(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i) v[static_cast<std::size_t>(i)] = static_cast<double>(full.shift(i, reversed));
    return v;
  };
  if (full.kind == GeneratorKind::PoissonRandomShiftMixture) {
    accumulate(marginals, shift_vec(false), jitter, 0.5, w);
    accumulate(marginals, shift_vec(true), jitter, 0.5, w);
  } else {
    accumulate(marginals, shift_vec(false), jitter, 1.0, w);
  }
  return w;
}

}  // namespace

SpectralPmf build_spectral(const GeneratorSpec& spec, int d) {
  if (d == 1) return degenerate_spectral(1);
  return SpectralPmf::from_weights(d, generator_weights(spec, d, {0.0}));
}

SpectralPmf spectral_from_delta(const DeltaPmf& delta) {
  Weights w;
  for (std::size_t i = 0; i < delta.size(); ++i) {
    const auto v = static_cast<double>(delta.support()[i]);
    w[{std::min(v, 0.0), std::min(-v, 0.0)}] += delta.probs()[i];
  }
  return SpectralPmf::from_weights(2, w);
}

SpectralPmf build_jittered_spectral(const GeneratorSpec& spec, int d, int grid) {
  if (grid < 1) throw Error(ErrorCode::InvalidArgument, "jitter grid must be positive");
  if (d == 1) return degenerate_spectral(1);
  std::vector<double> jitter(static_cast<std::size_t>(grid));
  for (int j = 0; j < grid; ++j) jitter[static_cast<std::size_t>(j)] = (j + 0.5) / grid;
  return SpectralPmf::from_weights(d, generator_weights(spec, d, jitter));
}

DeltaPmf delta_from_spectral(const SpectralPmf& s) {
  if (s.dim() != 2) throw Error(ErrorCode::DimensionMismatch, "Delta is defined for bivariate spectra");
  if (!s.integer_valued()) throw Error(ErrorCode::InvalidArgument, "spectrum is not integer valued");
  std::map<std::int64_t, double> w;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto p = s.point(i);
    w[static_cast<std::int64_t>(p[0] - p[1])] += s.prob(i);
  }
  return DeltaPmf::from_weights(w);
}

DeltaPmf delta_pmf_from_spec(const GeneratorSpec& spec) {
  if (spec.kind == GeneratorKind::EmpiricalDelta) return *spec.delta_pmf;
  return delta_from_spectral(build_spectral(spec, 2));
}

}  // namespace mdgpd
