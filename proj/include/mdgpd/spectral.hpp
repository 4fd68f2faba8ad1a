#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <vector>

#include "mdgpd/core.hpp"

namespace mdgpd {

/// Finite law of a spectral vector S with max(S) = 0 at every support point.
///
/// Points are stored as doubles so that real-valued spectra (jittered
/// generators, gamma-ratio conditional spectra) share the same evaluator.
class SpectralPmf {
 public:
  /// Row-major points (size() * dim values). Throws InvalidPmf unless every
  /// point has maximum exactly 0 and the probabilities sum to one.
  SpectralPmf(int dim, std::vector<double> points, std::vector<double> probs);

  /// Normalizes nonnegative weights keyed by point; zero weights are dropped.
  static SpectralPmf from_weights(int dim, const std::map<std::vector<double>, double>& weights);

  [[nodiscard]] int dim() const { return dim_; }
  [[nodiscard]] std::size_t size() const { return probs_.size(); }
  [[nodiscard]] std::span<const double> point(std::size_t i) const {
    return {points_.data() + i * static_cast<std::size_t>(dim_), static_cast<std::size_t>(dim_)};
  }
  [[nodiscard]] double prob(std::size_t i) const { return probs_[i]; }
  [[nodiscard]] std::span<const double> probs() const { return probs_; }
  [[nodiscard]] bool integer_valued() const;

 private:
  int dim_;
  std::vector<double> points_;
  std::vector<double> probs_;
};

/// Poisson pmf on 0..K with K the first index whose upper tail is below
/// kTailMass, renormalized to sum to one.
std::vector<double> truncated_poisson(double rate);

/// S = 0 in dimension d.
SpectralPmf degenerate_spectral(int d);

/// Exact law of T - max(T) for a generator, enumerated over truncated Poisson
/// supports. The common component cancels and is not enumerated.
SpectralPmf build_spectral(const GeneratorSpec& spec, int d);

/// Bivariate spectrum implied by a Delta law: (min(Delta, 0), min(-Delta, 0)).
SpectralPmf spectral_from_delta(const DeltaPmf& delta);

/// Continuous counterpart of build_spectral: every coordinate of T receives
/// an independent uniform jitter on the midpoint grid {(j + 1/2) / grid}.
SpectralPmf build_jittered_spectral(const GeneratorSpec& spec, int d, int grid = 8);

/// Law of S1 - S2 (equal to T1 - T2) for an integer bivariate spectrum.
DeltaPmf delta_from_spectral(const SpectralPmf& s);

/// Law of T1 - T2 under a bivariate generator.
DeltaPmf delta_pmf_from_spec(const GeneratorSpec& spec);

}  // namespace mdgpd
