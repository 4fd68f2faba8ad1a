#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "mdgpd/core.hpp"
#include "mdgpd/random.hpp"

namespace mdgpd {

/// Row-major n x d matrix of real draws (continuous MGPD output).
struct RealSample {
  std::size_t cols = 0;
  std::vector<double> values;

  [[nodiscard]] std::size_t rows() const { return cols == 0 ? 0 : values.size() / cols; }
  [[nodiscard]] double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
};

/// Integer part convention for continuous draws.
enum class Rounding { Floor, Ceil };

/// G = ceil(E), E unit exponential, so P(G <= k) = 1 - e^{-k}.
std::vector<std::int64_t> sample_geometric_unit(RandomStream& stream, std::size_t n);

/// Draws of the generator T. Throws UnsupportedSpec for invalid specs.
CountSample sample_generator(const GeneratorSpec& spec, RandomStream& stream, std::size_t n);

/// Draws from a finite integer pmf by inverse cdf.
std::vector<std::int64_t> sample_delta(const DeltaPmf& delta, RandomStream& stream, std::size_t n);

/// Row-wise Delta_i = T_i - max_{j != i} T_j. Throws DimensionTooSmall if d < 2.
CountSample delta_from_generator(const CountSample& t);

/// Row-wise S = T - max(T).
CountSample spectral_from_generator(const CountSample& t);

/// Bivariate standard MDGPD from a Delta law: (G + Delta 1{Delta<0}, G - Delta 1{Delta>=0}).
CountSample sample_standard_mdgpd(const DeltaPmf& delta, RandomStream& stream, std::size_t n);
CountSample sample_standard_mdgpd(const GeneratorSpec& spec, RandomStream& stream, std::size_t n);

/// Standard MDGPD in dimension d: T - max(T) + G.
CountSample sample_standard_mdgpd_d(const GeneratorSpec& spec, RandomStream& stream, std::size_t n, int d);

/// Bivariate resampling: Delta* drawn uniformly from the observed N1 - N2.
CountSample bootstrap_mdgpd(const CountSample& observed, RandomStream& stream, std::size_t m);

/// Resampling in any dimension: the profile N - max(N) of a uniformly chosen
/// observed row is combined with a fresh geometric maximum.
CountSample bootstrap_mdgpd_d(const CountSample& observed, RandomStream& stream, std::size_t m);

/// Continuous standard MGPD Z = S + E with S the generator spectrum.
RealSample sample_standard_mgpd(const GeneratorSpec& spec, RandomStream& stream, std::size_t n, int d);

/// ceil(Z / Lambda), Lambda ~ Gamma(alpha, beta). With d = 1 the spectrum is 0.
CountSample sample_gamma_ratio_mdgpd(const GeneratorSpec& spec, const GammaParams& g, RandomStream& stream,
                                     std::size_t n, int d);

/// Marginal transform sigma (exp(xi z) - 1) / xi, with the sigma z limit near xi = 0.
double gpd_transform(double z, double sigma, double xi);

/// Continuous non-standard MGPD X = gpd_transform(S + E).
RealSample sample_continuous_mgpd(const GeneratorSpec& spec, const ModelParams& params, RandomStream& stream,
                                  std::size_t n);

/// Scenario (i): continuous MGPD reduced to integers (floor by default).
CountSample sample_discretized_mgpd(const GeneratorSpec& spec, const ModelParams& params, RandomStream& stream,
                                    std::size_t n, Rounding rounding = Rounding::Floor);

/// Non-standard MDGPD: ceil of the continuous MGPD built on the integer spectrum.
/// Its cdf at integer k matches the non-standard MDGPD cdf exactly.
CountSample sample_nonstandard_mdgpd(const GeneratorSpec& spec, const ModelParams& params, RandomStream& stream,
                                     std::size_t n);

}  // namespace mdgpd
