#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "mdgpd/core.hpp"
#include "mdgpd/spectral.hpp"

namespace mdgpd {

/// Univariate GPD cdf 1 - (1 + xi y / sigma)_+^{-1/xi}; 0 for y <= 0.
double univariate_gpd_cdf(double y, double sigma, double xi);

/// (1/xi) log(1 + xi k / sigma), or k / sigma when |xi| < kXiZero. Returns
/// +inf past the upper endpoint of a negative-shape margin and -inf below the
/// lower endpoint of a positive-shape margin.
double gpd_threshold(double k, double sigma, double xi);

// ---- bivariate standard law from Delta ------------------------------------

double joint_pmf_standard(std::int64_t n1, std::int64_t n2, const DeltaPmf& delta);
/// `which` is 0 or 1; coordinate 1 uses the Delta law of -Delta.
double marginal_pmf(std::int64_t n, int which, const DeltaPmf& delta);
double marginal_survival(std::int64_t n, int which, const DeltaPmf& delta);
double marginal_cdf(std::int64_t n, int which, const DeltaPmf& delta);

// ---- d-dimensional laws from a spectral pmf -------------------------------

/// E[1 ∧ exp(max(S - t))]; infinite thresholds are allowed.
double tail_expectation(std::span<const double> t, const SpectralPmf& s);

double cdf_standard(std::span<const std::int64_t> k, const SpectralPmf& s);
double pmf_standard(std::span<const std::int64_t> k, const SpectralPmf& s);

double cdf_nonstandard(std::span<const std::int64_t> k, const ModelParams& params, const SpectralPmf& s);
double pmf_nonstandard(std::span<const std::int64_t> k, const ModelParams& params, const SpectralPmf& s);
/// P(M_i <= k) for the non-standard law.
double marginal_cdf_nonstandard(std::int64_t k, int which, const ModelParams& params, const SpectralPmf& s);

/// P(M_i = k) for the non-standard law.
double marginal_pmf_nonstandard(std::int64_t k, int which, const ModelParams& params, const SpectralPmf& s);
/// Floor of a continuous MGPD built on the same spectrum (shift of the above by one).
double pmf_discretized(std::span<const std::int64_t> k, const ModelParams& params, const SpectralPmf& s);
double marginal_cdf_discretized(std::int64_t k, int which, const ModelParams& params, const SpectralPmf& s);

/// Continuous non-standard MGPD cdf at real x.
double mgpd_cdf(std::span<const double> x, const ModelParams& params, const SpectralPmf& s);

// ---- conditional laws ------------------------------------------------------

/// P(AN - m <= k | AN not <= m) for a standard MDGPD N with spectrum s.
/// Throws DegenerateConditioning when P(AN not <= m) = 0.
double conditional_cdf_linear(std::span<const std::int64_t> k, const LinearConstraint& c, const SpectralPmf& s);
/// Spectrum of the conditional law above.
SpectralPmf conditional_spectral_linear(const LinearConstraint& c, const SpectralPmf& s);

/// P(ceil(AM) - m <= k | ceil(AM) not <= m) with M = Z / Lambda.
double cdf_gamma_ratio(std::span<const std::int64_t> k, const LinearConstraint& c, const GammaParams& g,
                       const SpectralPmf& s);
/// Real-valued spectrum V - max(V) reweighted by exp(max V).
SpectralPmf gamma_ratio_spectral(const LinearConstraint& c, const GammaParams& g, const SpectralPmf& s);

/// Ratio of continuous to discrete tail expectations at thresholds
/// (1/xi) log(xi k / sigma + 1). Throws DegenerateDenominator.
double continuity_ratio(std::span<const std::int64_t> k, std::span<const double> sigma, std::span<const double> xi,
                        const SpectralPmf& spectral_cont, const SpectralPmf& spectral_disc);

// ---- likelihoods -----------------------------------------------------------

struct LikelihoodResult {
  double value = 0.0;  // -inf when any row has zero mass
  std::vector<std::size_t> zero_rows;
  [[nodiscard]] bool valid() const { return zero_rows.empty(); }
};

/// Sum of log joint_pmf_standard over rows. Throws ZeroLikelihoodRow listing
/// the offending rows.
double log_likelihood_standard(const CountSample& sample, const DeltaPmf& delta);
LikelihoodResult log_likelihood_standard_checked(const CountSample& sample, const DeltaPmf& delta);

enum class DiscreteModel { Mdgpd, DiscretizedMgpd };

/// Total log-likelihood under the non-standard MDGPD or the floor-discretized MGPD.
LikelihoodResult log_likelihood(const CountSample& sample, const ModelParams& params, const SpectralPmf& s,
                                DiscreteModel model);

/// Sum over coordinates and rows of the log marginal pmf. Unlike the joint
/// pmf, the margins of a non-standard law charge every integer between the
/// endpoints, so this stays finite under small parameter errors.
LikelihoodResult marginal_log_likelihood(const CountSample& sample, const ModelParams& params, const SpectralPmf& s,
                                         DiscreteModel model);

}  // namespace mdgpd
