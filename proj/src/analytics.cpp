#include "mdgpd/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

namespace mdgpd {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
const double kOneMinusInvE = -std::expm1(-1.0);

double clip_tail_term(double m) { return m >= 0.0 ? 1.0 : std::exp(m); }

void check_which(int which) {
  if (which != 0 && which != 1) throw Error(ErrorCode::InvalidArgument, "coordinate must be 0 or 1");
}

void check_dim(std::size_t got, int want, const char* what) {
  if (got != static_cast<std::size_t>(want)) {
    throw Error(ErrorCode::DimensionMismatch, std::string(what) + " has length " + std::to_string(got) +
                                                  ", expected " + std::to_string(want));
  }
}

// Rectangle differencing of 1 - tail(k - eps) over eps in {0,1}^d; the
// constant terms cancel.
template <typename TailAt>
double difference_pmf(std::span<const std::int64_t> k, TailAt&& tail_at) {
  const std::size_t d = k.size();
  std::vector<std::int64_t> corner(d);
  CompensatedSum acc;
  for (std::size_t mask = 0; mask < (std::size_t{1} << d); ++mask) {
    int bits = 0;
    for (std::size_t i = 0; i < d; ++i) {
      const bool down = (mask >> i) & 1U;
      bits += down ? 1 : 0;
      corner[i] = k[i] - (down ? 1 : 0);
    }
    const double t = tail_at(std::span<const std::int64_t>(corner));
    acc.add(bits % 2 == 0 ? -t : t);
  }
  return std::max(0.0, acc.value());
}

std::vector<double> nonstandard_thresholds(std::span<const std::int64_t> k, const ModelParams& p) {
  std::vector<double> t(k.size());
  for (std::size_t i = 0; i < k.size(); ++i) t[i] = gpd_threshold(static_cast<double>(k[i]), p.sigma[i], p.xi[i]);
  return t;
}

void check_spectral_params(std::size_t k, const ModelParams& p, const SpectralPmf& s) {
  require_valid(p);
  check_dim(k, p.dim, "k");
  check_dim(static_cast<std::size_t>(s.dim()), p.dim, "spectrum");
}

// Ceil-rounded tail for linear combinations: E[1 ∧ exp(ceil(max_i (a_i.S - t_i) / A_i))].
double linear_tail(std::span<const double> t, const LinearConstraint& c, const SpectralPmf& s) {
  CompensatedSum acc;
  for (std::size_t p = 0; p < s.size(); ++p) {
    const auto pt = s.point(p);
    double mx = -kInf;
    for (std::size_t i = 0; i < c.rows(); ++i) {
      double num = 0.0;
      for (std::size_t j = 0; j < c.cols(); ++j) num += static_cast<double>(c.matrix_a[i][j]) * pt[j];
      mx = std::max(mx, (num - t[i]) / static_cast<double>(c.row_sum(i)));
    }
    acc.add(s.prob(p) * clip_tail_term(std::ceil(mx)));
  }
  return acc.value();
}

// E[1 ∧ exp(max_i (w_i - alpha log(1 + t_i / (beta A_i))))].
double gamma_tail(std::span<const double> t, const LinearConstraint& c, const GammaParams& g, const SpectralPmf& s) {
  std::vector<double> shift(c.rows());
  bool saturated = false;
  for (std::size_t i = 0; i < c.rows(); ++i) {
    const double base = g.beta * static_cast<double>(c.row_sum(i));
    if (t[i] <= -base) {
      saturated = true;
      break;
    }
    shift[i] = g.alpha * std::log1p(t[i] / base);
  }
  if (saturated) return 1.0;
  CompensatedSum acc;
  for (std::size_t p = 0; p < s.size(); ++p) {
    const auto pt = s.point(p);
    double mx = -kInf;
    for (std::size_t i = 0; i < c.rows(); ++i) {
      double num = 0.0;
      for (std::size_t j = 0; j < c.cols(); ++j) num += static_cast<double>(c.matrix_a[i][j]) * pt[j];
      mx = std::max(mx, num / static_cast<double>(c.row_sum(i)) - shift[i]);
    }
    acc.add(s.prob(p) * clip_tail_term(mx));
  }
  return acc.value();
}

void check_constraint(std::size_t k, const LinearConstraint& c, const SpectralPmf& s) {
  validate_constraint(c);
  check_dim(k, static_cast<int>(c.rows()), "k");
  check_dim(c.cols(), s.dim(), "constraint columns");
}

// H(k) = [Q(m + k ∧ 0) - Q(m + k)] / Q(m) for a tail functional Q.
template <typename Tail>
double conditional_from_tail(std::span<const std::int64_t> k, const std::vector<std::int64_t>& m, Tail&& q) {
  const std::size_t n = k.size();
  std::vector<double> base(n), lower(n), upper(n);
  for (std::size_t i = 0; i < n; ++i) {
    base[i] = static_cast<double>(m[i]);
    lower[i] = static_cast<double>(m[i] + std::min<std::int64_t>(k[i], 0));
    upper[i] = static_cast<double>(m[i] + k[i]);
  }
  const double denom = q(base);
  if (!(denom > 0.0)) throw Error(ErrorCode::DegenerateConditioning, "conditioning event has probability zero");
  const double h = (q(lower) - q(upper)) / denom;
  return std::clamp(h, 0.0, 1.0);
}

}  // namespace

double univariate_gpd_cdf(double y, double sigma, double xi) {
  if (!(sigma > 0.0)) throw Error(ErrorCode::NonPositiveScale, "sigma must be positive");
  if (!(y > 0.0)) return 0.0;
  if (std::abs(xi) < kXiZero) return -std::expm1(-y / sigma);
  const double arg = 1.0 + xi * y / sigma;
  if (arg <= 0.0) return 1.0;
  return -std::expm1(-std::log(arg) / xi);
}

double gpd_threshold(double k, double sigma, double xi) {
  if (std::abs(xi) < kXiZero) return k / sigma;
  const double z = xi * k / sigma;
  if (z <= -1.0) return xi < 0.0 ? kInf : -kInf;
  return std::log1p(z) / xi;
}

// ---------------------------------------------------------------------------

double joint_pmf_standard(std::int64_t n1, std::int64_t n2, const DeltaPmf& delta) {
  const auto mx = std::max(n1, n2);
  if (mx < 1) return 0.0;
  return std::exp(-static_cast<double>(mx - 1)) * kOneMinusInvE * delta.prob_at(n1 - n2);
}

double marginal_pmf(std::int64_t n, int which, const DeltaPmf& delta) {
  check_which(which);
  const DeltaPmf d = which == 0 ? delta : delta.negated();
  const auto cut = std::min<std::int64_t>(0, n);
  CompensatedSum acc;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto v = d.support()[i];
    if (v < cut) {
      acc.add(d.probs()[i] * std::exp(static_cast<double>(v - n + 1)));
    } else if (v >= 0 && n > 0) {
      acc.add(d.probs()[i] * std::exp(static_cast<double>(1 - n)));
    }
  }
  return kOneMinusInvE * acc.value();
}

double marginal_survival(std::int64_t n, int which, const DeltaPmf& delta) {
  check_which(which);
  const DeltaPmf d = which == 0 ? delta : delta.negated();
  CompensatedSum acc;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto v = d.support()[i];
    const double p = d.probs()[i];
    if (n < 0 && v >= n && v < 0) acc.add(p);
    if (v < 0 && v <= n - 1) acc.add(p * std::exp(static_cast<double>(v - n)));
    if (v >= 0) acc.add(n <= 0 ? p : p * std::exp(-static_cast<double>(n)));
  }
  return acc.value();
}

double marginal_cdf(std::int64_t n, int which, const DeltaPmf& delta) {
  return 1.0 - marginal_survival(n, which, delta);
}

// ---------------------------------------------------------------------------

double tail_expectation(std::span<const double> t, const SpectralPmf& s) {
  check_dim(t.size(), s.dim(), "threshold");
  CompensatedSum acc;
  for (std::size_t p = 0; p < s.size(); ++p) {
    const auto pt = s.point(p);
    double mx = -kInf;
    for (std::size_t i = 0; i < t.size(); ++i) mx = std::max(mx, pt[i] - t[i]);
    acc.add(s.prob(p) * clip_tail_term(mx));
  }
  return acc.value();
}

double cdf_standard(std::span<const std::int64_t> k, const SpectralPmf& s) {
  std::vector<double> t(k.begin(), k.end());
  return std::clamp(1.0 - tail_expectation(t, s), 0.0, 1.0);
}

double pmf_standard(std::span<const std::int64_t> k, const SpectralPmf& s) {
  check_dim(k.size(), s.dim(), "k");
  return difference_pmf(k, [&](std::span<const std::int64_t> c) {
    std::vector<double> t(c.begin(), c.end());
    return tail_expectation(t, s);
  });
}

double cdf_nonstandard(std::span<const std::int64_t> k, const ModelParams& params, const SpectralPmf& s) {
  check_spectral_params(k.size(), params, s);
  return std::clamp(1.0 - tail_expectation(nonstandard_thresholds(k, params), s), 0.0, 1.0);
}

double pmf_nonstandard(std::span<const std::int64_t> k, const ModelParams& params, const SpectralPmf& s) {
  check_spectral_params(k.size(), params, s);
  return difference_pmf(k, [&](std::span<const std::int64_t> c) {
    return tail_expectation(nonstandard_thresholds(c, params), s);
  });
}

double marginal_cdf_nonstandard(std::int64_t k, int which, const ModelParams& params, const SpectralPmf& s) {
  require_valid(params);
  if (which < 0 || which >= params.dim) throw Error(ErrorCode::InvalidArgument, "coordinate out of range");
  std::vector<double> t(static_cast<std::size_t>(params.dim), kInf);
  const auto w = static_cast<std::size_t>(which);
  t[w] = gpd_threshold(static_cast<double>(k), params.sigma[w], params.xi[w]);
  return std::clamp(1.0 - tail_expectation(t, s), 0.0, 1.0);
}

double pmf_discretized(std::span<const std::int64_t> k, const ModelParams& params, const SpectralPmf& s) {
  std::vector<std::int64_t> up(k.begin(), k.end());
  for (auto& v : up) ++v;
  return pmf_nonstandard(up, params, s);
}

double marginal_cdf_discretized(std::int64_t k, int which, const ModelParams& params, const SpectralPmf& s) {
  return marginal_cdf_nonstandard(k + 1, which, params, s);
}

double mgpd_cdf(std::span<const double> x, const ModelParams& params, const SpectralPmf& s) {
  check_spectral_params(x.size(), params, s);
  std::vector<double> t(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) t[i] = gpd_threshold(x[i], params.sigma[i], params.xi[i]);
  return std::clamp(1.0 - tail_expectation(t, s), 0.0, 1.0);
}

// ---------------------------------------------------------------------------

double conditional_cdf_linear(std::span<const std::int64_t> k, const LinearConstraint& c, const SpectralPmf& s) {
  check_constraint(k.size(), c, s);
  if (!s.integer_valued()) throw Error(ErrorCode::InvalidArgument, "linear conditioning needs an integer spectrum");
  return conditional_from_tail(k, c.threshold_m, [&](const std::vector<double>& t) { return linear_tail(t, c, s); });
}

SpectralPmf conditional_spectral_linear(const LinearConstraint& c, const SpectralPmf& s) {
  check_constraint(c.rows(), c, s);
  std::map<std::vector<double>, double> w;
  std::vector<double> u(c.rows());
  for (std::size_t p = 0; p < s.size(); ++p) {
    const auto pt = s.point(p);
    for (std::size_t i = 0; i < c.rows(); ++i) {
      double num = 0.0;
      for (std::size_t j = 0; j < c.cols(); ++j) num += static_cast<double>(c.matrix_a[i][j]) * pt[j];
      u[i] = (num - static_cast<double>(c.threshold_m[i])) / static_cast<double>(c.row_sum(i));
    }
    const double mx = *std::max_element(u.begin(), u.end());
    std::vector<double> key(c.rows());
    for (std::size_t i = 0; i < c.rows(); ++i) key[i] = std::ceil(u[i] - mx) + 0.0;
    w[key] += s.prob(p) * std::exp(std::ceil(mx));
  }
  return SpectralPmf::from_weights(static_cast<int>(c.rows()), w);
}

double cdf_gamma_ratio(std::span<const std::int64_t> k, const LinearConstraint& c, const GammaParams& g,
                       const SpectralPmf& s) {
  validate_gamma(g);
  check_constraint(k.size(), c, s);
  return conditional_from_tail(k, c.threshold_m,
                               [&](const std::vector<double>& t) { return gamma_tail(t, c, g, s); });
}

SpectralPmf gamma_ratio_spectral(const LinearConstraint& c, const GammaParams& g, const SpectralPmf& s) {
  validate_gamma(g);
  check_constraint(c.rows(), c, s);
  std::map<std::vector<double>, double> w;
  std::vector<double> v(c.rows());
  for (std::size_t p = 0; p < s.size(); ++p) {
    const auto pt = s.point(p);
    for (std::size_t i = 0; i < c.rows(); ++i) {
      const double a = static_cast<double>(c.row_sum(i));
      double num = 0.0;
      for (std::size_t j = 0; j < c.cols(); ++j) num += static_cast<double>(c.matrix_a[i][j]) * pt[j];
      v[i] = num / a - g.alpha * std::log1p(static_cast<double>(c.threshold_m[i]) / (g.beta * a));
    }
    const double mx = *std::max_element(v.begin(), v.end());
    std::vector<double> key(c.rows());
    for (std::size_t i = 0; i < c.rows(); ++i) key[i] = (v[i] - mx) + 0.0;
    w[key] += s.prob(p) * std::exp(mx);
  }
  return SpectralPmf::from_weights(static_cast<int>(c.rows()), w);
}

double continuity_ratio(std::span<const std::int64_t> k, std::span<const double> sigma, std::span<const double> xi,
                        const SpectralPmf& spectral_cont, const SpectralPmf& spectral_disc) {
  const int d = spectral_disc.dim();
  check_dim(k.size(), d, "k");
  check_dim(sigma.size(), d, "sigma");
  check_dim(xi.size(), d, "xi");
  check_dim(static_cast<std::size_t>(spectral_cont.dim()), d, "continuous spectrum");
  std::vector<double> t(k.size());
  for (std::size_t i = 0; i < k.size(); ++i) {
    if (!(sigma[i] > 0.0)) throw Error(ErrorCode::NonPositiveScale, "sigma must be positive");
    if (xi[i] < 0.0) throw Error(ErrorCode::InvalidArgument, "xi must be nonnegative");
    if (k[i] < 1) throw Error(ErrorCode::InvalidArgument, "k must be at least 1");
    t[i] = gpd_threshold(static_cast<double>(k[i]), sigma[i], xi[i]);
  }
  const double den = tail_expectation(t, spectral_disc);
  if (!(den > 0.0)) throw Error(ErrorCode::DegenerateDenominator, "discrete tail expectation is zero");
  return tail_expectation(t, spectral_cont) / den;
}

// ---------------------------------------------------------------------------

LikelihoodResult log_likelihood_standard_checked(const CountSample& sample, const DeltaPmf& delta) {
  if (sample.cols() != 2) throw Error(ErrorCode::DimensionMismatch, "standard likelihood needs two columns");
  LikelihoodResult out;
  CompensatedSum acc;
  for (std::size_t r = 0; r < sample.rows(); ++r) {
    const double p = joint_pmf_standard(sample(r, 0), sample(r, 1), delta);
    if (p > 0.0) {
      acc.add(std::log(p));
    } else {
      out.zero_rows.push_back(r);
    }
  }
  out.value = out.valid() ? acc.value() : -kInf;
  return out;
}

double log_likelihood_standard(const CountSample& sample, const DeltaPmf& delta) {
  auto res = log_likelihood_standard_checked(sample, delta);
  if (!res.valid()) {
    std::ostringstream os;
    os << "rows with zero probability:";
    for (std::size_t i = 0; i < res.zero_rows.size() && i < 20; ++i) os << ' ' << res.zero_rows[i];
    if (res.zero_rows.size() > 20) os << " ... (" << res.zero_rows.size() << " total)";
    throw Error(ErrorCode::ZeroLikelihoodRow, os.str());
  }
  return res.value;
}

LikelihoodResult log_likelihood(const CountSample& sample, const ModelParams& params, const SpectralPmf& s,
                                DiscreteModel model) {
  check_spectral_params(sample.cols(), params, s);
  std::map<std::vector<std::int64_t>, double> memo;
  LikelihoodResult out;
  CompensatedSum acc;
  for (std::size_t r = 0; r < sample.rows(); ++r) {
    const auto row = sample.row(r);
    std::vector<std::int64_t> key(row.begin(), row.end());
    auto it = memo.find(key);
    if (it == memo.end()) {
      const double p = model == DiscreteModel::Mdgpd ? pmf_nonstandard(key, params, s) : pmf_discretized(key, params, s);
      it = memo.emplace(std::move(key), p).first;
    }
    if (it->second > 0.0) {
      acc.add(std::log(it->second));
    } else {
      out.zero_rows.push_back(r);
    }
  }
  out.value = out.valid() ? acc.value() : -kInf;
  return out;
}

double marginal_pmf_nonstandard(std::int64_t k, int which, const ModelParams& params, const SpectralPmf& s) {
  require_valid(params);
  if (which < 0 || which >= params.dim) throw Error(ErrorCode::InvalidArgument, "coordinate out of range");
  // Differencing tails keeps precision far out in the upper tail.
  std::vector<double> lo(static_cast<std::size_t>(params.dim), kInf);
  auto hi = lo;
  const auto w = static_cast<std::size_t>(which);
  lo[w] = gpd_threshold(static_cast<double>(k - 1), params.sigma[w], params.xi[w]);
  hi[w] = gpd_threshold(static_cast<double>(k), params.sigma[w], params.xi[w]);
  return std::max(0.0, tail_expectation(lo, s) - tail_expectation(hi, s));
}

LikelihoodResult marginal_log_likelihood(const CountSample& sample, const ModelParams& params, const SpectralPmf& s,
                                         DiscreteModel model) {
  check_spectral_params(sample.cols(), params, s);
  const std::int64_t shift = model == DiscreteModel::Mdgpd ? 0 : 1;
  LikelihoodResult out;
  CompensatedSum acc;
  for (std::size_t i = 0; i < sample.cols(); ++i) {
    std::map<std::int64_t, double> memo;
    for (std::size_t r = 0; r < sample.rows(); ++r) {
      const auto k = sample(r, i) + shift;
      auto it = memo.find(k);
      if (it == memo.end()) it = memo.emplace(k, marginal_pmf_nonstandard(k, static_cast<int>(i), params, s)).first;
      if (it->second > 0.0) {
        acc.add(std::log(it->second));
      } else if (out.zero_rows.empty() || out.zero_rows.back() != r) {
        out.zero_rows.push_back(r);
      }
    }
  }
  std::sort(out.zero_rows.begin(), out.zero_rows.end());
  out.zero_rows.erase(std::unique(out.zero_rows.begin(), out.zero_rows.end()), out.zero_rows.end());
  out.value = out.valid() ? acc.value() : -kInf;
  return out;
}

}  // namespace mdgpd
