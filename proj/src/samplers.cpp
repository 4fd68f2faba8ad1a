#include "mdgpd/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mdgpd {

namespace {

std::int64_t ceil_to_int(double x) { return static_cast<std::int64_t>(std::ceil(x)); }
std::int64_t floor_to_int(double x) { return static_cast<std::int64_t>(std::floor(x)); }

void draw_generator_row(const GeneratorSpec& spec, double common, RandomStream& stream, std::int64_t* out) {
  if (spec.kind == GeneratorKind::EmpiricalDelta) {
    const auto& pmf = *spec.delta_pmf;
    const double u = stream.uniform01();
    const auto probs = pmf.probs();
    double cdf = 0.0;
    std::size_t i = 0;
    for (; i + 1 < probs.size(); ++i) {
      cdf += probs[i];
      if (u <= cdf) break;
    }
    out[0] = pmf.support()[i];
    out[1] = 0;
    return;
  }
  const int d = spec.dim();
  const std::int64_t c = common > 0.0 ? stream.poisson(common) : 0;
  const bool reversed = spec.kind == GeneratorKind::PoissonRandomShiftMixture && stream.bernoulli(0.5);
  for (int i = 0; i < d; ++i) {
    out[i] = c + stream.poisson(spec.rates[static_cast<std::size_t>(i)] - common) + spec.shift(i, reversed);
  }
}

CountSample assemble_bivariate(std::span<const std::int64_t> delta, std::span<const std::int64_t> g) {
  CountSample out(delta.size(), 2);
  for (std::size_t k = 0; k < delta.size(); ++k) {
    const auto dk = delta[k];
    out(k, 0) = g[k] + (dk < 0 ? dk : 0);
    out(k, 1) = g[k] - (dk >= 0 ? dk : 0);
  }
  return out;
}

}  // namespace

std::vector<std::int64_t> sample_geometric_unit(RandomStream& stream, std::size_t n) {
  std::vector<std::int64_t> g(n);
  for (auto& v : g) v = std::max<std::int64_t>(1, ceil_to_int(stream.exponential()));
  return g;
}

CountSample sample_generator(const GeneratorSpec& spec, RandomStream& stream, std::size_t n) {
  validate_spec(spec);
  const auto d = static_cast<std::size_t>(spec.dim());
  const double common = spec.common_rate();
  CountSample t(n, d);
  for (std::size_t r = 0; r < n; ++r) draw_generator_row(spec, common, stream, &t(r, 0));
  return t;
}

std::vector<std::int64_t> sample_delta(const DeltaPmf& delta, RandomStream& stream, std::size_t n) {
  std::vector<double> cum(delta.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < delta.size(); ++i) cum[i] = acc += delta.probs()[i];
  std::vector<std::int64_t> out(n);
  for (auto& v : out) {
    const double u = stream.uniform01() * acc;
    auto it = std::lower_bound(cum.begin(), cum.end(), u);
    if (it == cum.end()) --it;
    v = delta.support()[static_cast<std::size_t>(it - cum.begin())];
  }
  return out;
}

CountSample delta_from_generator(const CountSample& t) {
  const std::size_t d = t.cols();
  if (d < 2) throw Error(ErrorCode::DimensionTooSmall, "Delta needs at least two coordinates");
  CountSample out(t.rows(), d);
  for (std::size_t r = 0; r < t.rows(); ++r) {
    // Largest and second largest values give max over j != i in O(d).
    std::size_t arg = 0;
    for (std::size_t i = 1; i < d; ++i) {
      if (t(r, i) > t(r, arg)) arg = i;
    }
    std::int64_t second = std::numeric_limits<std::int64_t>::min();
    for (std::size_t i = 0; i < d; ++i) {
      if (i != arg) second = std::max(second, t(r, i));
    }
    for (std::size_t i = 0; i < d; ++i) out(r, i) = t(r, i) - (i == arg ? second : t(r, arg));
  }
  return out;
}

CountSample spectral_from_generator(const CountSample& t) {
  CountSample out(t.rows(), t.cols());
  for (std::size_t r = 0; r < t.rows(); ++r) {
    const auto row = t.row(r);
    const auto mx = *std::max_element(row.begin(), row.end());
    for (std::size_t i = 0; i < t.cols(); ++i) out(r, i) = row[i] - mx;
  }
  return out;
}

CountSample sample_standard_mdgpd(const DeltaPmf& delta, RandomStream& stream, std::size_t n) {
  auto delta_stream = stream.split("delta");
  auto geom_stream = stream.split("geometric");
  const auto dk = sample_delta(delta, delta_stream, n);
  const auto g = sample_geometric_unit(geom_stream, n);
  return assemble_bivariate(dk, g);
}

CountSample sample_standard_mdgpd(const GeneratorSpec& spec, RandomStream& stream, std::size_t n) {
  if (spec.dim() != 2) throw Error(ErrorCode::DimensionMismatch, "bivariate sampler needs a bivariate generator");
  auto gen_stream = stream.split("generator");
  auto geom_stream = stream.split("geometric");
  const auto t = sample_generator(spec, gen_stream, n);
  std::vector<std::int64_t> dk(n);
  for (std::size_t k = 0; k < n; ++k) dk[k] = t(k, 0) - t(k, 1);
  const auto g = sample_geometric_unit(geom_stream, n);
  return assemble_bivariate(dk, g);
}

CountSample sample_standard_mdgpd_d(const GeneratorSpec& spec, RandomStream& stream, std::size_t n, int d) {
  if (d < 2) throw Error(ErrorCode::DimensionTooSmall, "dimension must be at least 2");
  const auto full = broadcast_spec(spec, d);
  auto gen_stream = stream.split("generator");
  auto geom_stream = stream.split("geometric");
  auto s = spectral_from_generator(sample_generator(full, gen_stream, n));
  const auto g = sample_geometric_unit(geom_stream, n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t i = 0; i < s.cols(); ++i) s(r, i) += g[r];
  }
  return s;
}

CountSample bootstrap_mdgpd(const CountSample& observed, RandomStream& stream, std::size_t m) {
  if (observed.rows() == 0) throw Error(ErrorCode::EmptyInput, "bootstrap needs at least one observation");
  if (observed.cols() != 2) throw Error(ErrorCode::DimensionMismatch, "bivariate bootstrap needs two columns");
  std::vector<std::int64_t> pool(observed.rows());
  for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = observed(i, 0) - observed(i, 1);
  auto geom_stream = stream.split("geometric");
  auto pick_stream = stream.split("resample");
  const auto g = sample_geometric_unit(geom_stream, m);
  std::vector<std::int64_t> dk(m);
  for (auto& v : dk) v = pool[pick_stream.index(pool.size())];
  return assemble_bivariate(dk, g);
}

CountSample bootstrap_mdgpd_d(const CountSample& observed, RandomStream& stream, std::size_t m) {
  if (observed.rows() == 0) throw Error(ErrorCode::EmptyInput, "bootstrap needs at least one observation");
  if (observed.cols() < 2) throw Error(ErrorCode::DimensionTooSmall, "dimension must be at least 2");
  const auto profile = spectral_from_generator(observed);
  auto geom_stream = stream.split("geometric");
  auto pick_stream = stream.split("resample");
  const auto g = sample_geometric_unit(geom_stream, m);
  CountSample out(m, observed.cols());
  for (std::size_t k = 0; k < m; ++k) {
    const auto src = pick_stream.index(profile.rows());
    for (std::size_t i = 0; i < out.cols(); ++i) out(k, i) = g[k] + profile(src, i);
  }
  return out;
}

RealSample sample_standard_mgpd(const GeneratorSpec& spec, RandomStream& stream, std::size_t n, int d) {
  RealSample z;
  z.cols = static_cast<std::size_t>(d);
  z.values.resize(n * z.cols);
  auto exp_stream = stream.split("exponential");
  if (d == 1) {
    for (auto& v : z.values) v = exp_stream.exponential();
    return z;
  }
  auto gen_stream = stream.split("generator");
  const auto s = spectral_from_generator(sample_generator(broadcast_spec(spec, d), gen_stream, n));
  for (std::size_t r = 0; r < n; ++r) {
    const double e = exp_stream.exponential();
    for (std::size_t i = 0; i < z.cols; ++i) z.values[r * z.cols + i] = static_cast<double>(s(r, i)) + e;
  }
  return z;
}

CountSample sample_gamma_ratio_mdgpd(const GeneratorSpec& spec, const GammaParams& g, RandomStream& stream,
                                     std::size_t n, int d) {
  validate_gamma(g);
  const auto z = sample_standard_mgpd(spec, stream, n, d);
  auto gamma_stream = stream.split("gamma");
  CountSample out(n, z.cols);
  for (std::size_t r = 0; r < n; ++r) {
    const double lambda = gamma_stream.gamma(g.alpha, g.beta);
    for (std::size_t i = 0; i < z.cols; ++i) out(r, i) = ceil_to_int(z(r, i) / lambda);
  }
  return out;
}

double gpd_transform(double z, double sigma, double xi) {
  if (std::abs(xi) < kXiZero) return sigma * z;
  return sigma * std::expm1(xi * z) / xi;
}

RealSample sample_continuous_mgpd(const GeneratorSpec& spec, const ModelParams& params, RandomStream& stream,
                                  std::size_t n) {
  require_valid(params);
  auto x = sample_standard_mgpd(spec, stream, n, params.dim);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t i = 0; i < x.cols; ++i) {
      auto& v = x.values[r * x.cols + i];
      v = gpd_transform(v, params.sigma[i], params.xi[i]);
    }
  }
  return x;
}

CountSample sample_discretized_mgpd(const GeneratorSpec& spec, const ModelParams& params, RandomStream& stream,
                                    std::size_t n, Rounding rounding) {
  const auto x = sample_continuous_mgpd(spec, params, stream, n);
  CountSample out(n, x.cols);
  for (std::size_t k = 0; k < x.values.size(); ++k) {
    const double v = x.values[k];
    out(k / x.cols, k % x.cols) = rounding == Rounding::Floor ? floor_to_int(v) : ceil_to_int(v);
  }
  return out;
}

CountSample sample_nonstandard_mdgpd(const GeneratorSpec& spec, const ModelParams& params, RandomStream& stream,
                                     std::size_t n) {
  return sample_discretized_mgpd(spec, params, stream, n, Rounding::Ceil);
}

}  // namespace mdgpd
