#include "mdgpd/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace mdgpd {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonPositiveScale: return "NonPositiveScale";
    case ErrorCode::RhoOutOfRange: return "RhoOutOfRange";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::UnsupportedSpec: return "UnsupportedSpec";
    case ErrorCode::DimensionTooSmall: return "DimensionTooSmall";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::InvalidPmf: return "InvalidPmf";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DegenerateConditioning: return "DegenerateConditioning";
    case ErrorCode::DegenerateDenominator: return "DegenerateDenominator";
    case ErrorCode::ZeroLikelihoodRow: return "ZeroLikelihoodRow";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::EmptySeries: return "EmptySeries";
    case ErrorCode::EmptySpellSet: return "EmptySpellSet";
    case ErrorCode::MisalignedDates: return "MisalignedDates";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Config: return "Config";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

std::optional<ValidationError> validate_params(const ModelParams& p) {
  if (p.dim < 1) {
    return ValidationError{ErrorCode::DimensionMismatch, "dim", "dimension must be positive"};
  }
  const auto d = static_cast<std::size_t>(p.dim);
  if (p.sigma.size() != d) {
    return ValidationError{ErrorCode::DimensionMismatch, "sigma",
                           "expected " + std::to_string(d) + " scale values"};
  }
  if (p.xi.size() != d) {
    return ValidationError{ErrorCode::DimensionMismatch, "xi",
                           "expected " + std::to_string(d) + " shape values"};
  }
  for (std::size_t i = 0; i < d; ++i) {
    if (!(p.sigma[i] > 0.0) || !std::isfinite(p.sigma[i])) {
      return ValidationError{ErrorCode::NonPositiveScale, "sigma",
                             "sigma[" + std::to_string(i) + "] must be positive"};
    }
    if (!std::isfinite(p.xi[i])) {
      return ValidationError{ErrorCode::InvalidArgument, "xi", "xi must be finite"};
    }
  }
  if (!(p.rho > -1.0 && p.rho < 1.0)) {
    return ValidationError{ErrorCode::RhoOutOfRange, "rho", "rho must lie in (-1, 1)"};
  }
  for (double r : p.gen_params) {
    if (!(r > 0.0) || !std::isfinite(r)) {
      return ValidationError{ErrorCode::InvalidArgument, "gen_params",
                             "generator parameters must be positive"};
    }
  }
  return std::nullopt;
}

void require_valid(const ModelParams& p) {
  if (auto err = validate_params(p)) {
    throw Error(err->code, err->field + ": " + err->message);
  }
}

// ---------------------------------------------------------------------------

DeltaPmf::DeltaPmf(std::vector<std::int64_t> support, std::vector<double> probs)
    : support_(std::move(support)), probs_(std::move(probs)) {
  if (support_.empty() || support_.size() != probs_.size()) {
    throw Error(ErrorCode::InvalidPmf, "support and probs must be nonempty and of equal length");
  }
  CompensatedSum total;
  for (std::size_t i = 0; i < probs_.size(); ++i) {
    if (i > 0 && support_[i] <= support_[i - 1]) {
      throw Error(ErrorCode::InvalidPmf, "support must be strictly increasing");
    }
    if (!(probs_[i] >= 0.0)) throw Error(ErrorCode::InvalidPmf, "probabilities must be nonnegative");
    total.add(probs_[i]);
  }
  if (std::abs(total.value() - 1.0) > 1e-12) {
    std::ostringstream os;
    os.precision(17);
    os << "probabilities sum to " << total.value();
    throw Error(ErrorCode::InvalidPmf, os.str());
  }
}

DeltaPmf DeltaPmf::from_weights(const std::map<std::int64_t, double>& weights) {
  CompensatedSum total;
  for (const auto& [k, w] : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw Error(ErrorCode::InvalidPmf, "weights must be finite and nonnegative");
    total.add(w);
  }
  if (!(total.value() > 0.0)) throw Error(ErrorCode::EmptyInput, "no positive weight");
  std::vector<std::int64_t> support;
  std::vector<double> probs;
  for (const auto& [k, w] : weights) {
    if (w == 0.0) continue;
    support.push_back(k);
    probs.push_back(w / total.value());
  }
  // One more pass absorbs the rounding of the division into the largest atom.
  CompensatedSum check;
  for (double p : probs) check.add(p);
  const auto big = std::max_element(probs.begin(), probs.end());
  *big += 1.0 - check.value();
  return DeltaPmf(std::move(support), std::move(probs));
}

DeltaPmf DeltaPmf::from_values(std::span<const std::int64_t> values) {
  if (values.empty()) throw Error(ErrorCode::EmptyInput, "cannot build a pmf from no values");
  std::map<std::int64_t, double> counts;
  for (auto v : values) counts[v] += 1.0;
  return from_weights(counts);
}

DeltaPmf DeltaPmf::point_mass(std::int64_t at) { return DeltaPmf({at}, {1.0}); }

double DeltaPmf::prob_at(std::int64_t k) const {
  const auto it = std::lower_bound(support_.begin(), support_.end(), k);
  if (it == support_.end() || *it != k) return 0.0;
  return probs_[static_cast<std::size_t>(it - support_.begin())];
}

DeltaPmf DeltaPmf::negated() const {
  std::vector<std::int64_t> s(support_.rbegin(), support_.rend());
  for (auto& v : s) v = -v;
  std::vector<double> p(probs_.rbegin(), probs_.rend());
  return DeltaPmf(std::move(s), std::move(p));
}

double DeltaPmf::mean() const {
  CompensatedSum m;
  for (std::size_t i = 0; i < size(); ++i) m.add(static_cast<double>(support_[i]) * probs_[i]);
  return m.value();
}

// ---------------------------------------------------------------------------

std::string_view to_string(GeneratorKind kind) {
  switch (kind) {
    case GeneratorKind::PoissonIndependent: return "poisson_independent";
    case GeneratorKind::PoissonCommonShock: return "poisson_common_shock";
    case GeneratorKind::PoissonShifted: return "poisson_shifted";
    case GeneratorKind::PoissonRandomShiftMixture: return "poisson_random_shift_mixture";
    case GeneratorKind::EmpiricalDelta: return "empirical_delta";
  }
  return "unknown";
}

GeneratorKind generator_kind_from_string(std::string_view name) {
  for (auto k : {GeneratorKind::PoissonIndependent, GeneratorKind::PoissonCommonShock,
                 GeneratorKind::PoissonShifted, GeneratorKind::PoissonRandomShiftMixture,
                 GeneratorKind::EmpiricalDelta}) {
    if (to_string(k) == name) return k;
  }
  throw Error(ErrorCode::UnsupportedSpec, "unknown generator kind '" + std::string(name) + "'");
}

int GeneratorSpec::dim() const {
  if (kind == GeneratorKind::EmpiricalDelta) return 2;
  return static_cast<int>(rates.size());
}

double GeneratorSpec::common_rate() const {
  if (kind == GeneratorKind::EmpiricalDelta || target_corr <= 0.0 || rates.empty()) return 0.0;
  double log_mean = 0.0;
  for (double r : rates) log_mean += std::log(r);
  return target_corr * std::exp(log_mean / static_cast<double>(rates.size()));
}

std::int64_t GeneratorSpec::shift(int i, bool reversed) const {
  if (shifts.empty()) return 0;
  const auto n = shifts.size();
  const auto idx = static_cast<std::size_t>(i);
  return reversed ? shifts[n - 1 - idx] : shifts[idx];
}

void validate_spec(const GeneratorSpec& spec) {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::UnsupportedSpec, msg); };
  if (spec.kind == GeneratorKind::EmpiricalDelta) {
    if (!spec.delta_pmf) fail("empirical_delta requires delta_pmf");
    return;
  }
  if (spec.rates.empty()) fail("Poisson generators need at least one rate");
  for (double r : spec.rates) {
    if (!(r > 0.0) || !std::isfinite(r)) fail("rates must be positive");
  }
  if (!(spec.target_corr >= 0.0 && spec.target_corr < 1.0)) fail("target_corr must lie in [0, 1)");
  if (spec.kind == GeneratorKind::PoissonIndependent && spec.target_corr != 0.0) {
    fail("poisson_independent requires target_corr = 0");
  }
  const double c = spec.common_rate();
  for (double r : spec.rates) {
    if (!(r - c > 0.0)) fail("target_corr too large for the given rates: component rate not positive");
  }
  const bool shifted = spec.kind == GeneratorKind::PoissonShifted ||
                       spec.kind == GeneratorKind::PoissonRandomShiftMixture;
  if (shifted && spec.shifts.size() != spec.rates.size()) {
    fail("shifts must have one entry per rate");
  }
  if (!shifted && !spec.shifts.empty()) {
    bool all_zero = std::all_of(spec.shifts.begin(), spec.shifts.end(), [](auto s) { return s == 0; });
    if (!all_zero) fail("shifts are only supported by shifted kinds");
  }
}

GeneratorSpec broadcast_spec(const GeneratorSpec& spec, int d) {
  if (spec.dim() == d) return spec;
  if (spec.kind == GeneratorKind::EmpiricalDelta) {
    throw Error(ErrorCode::DimensionMismatch, "empirical_delta is bivariate");
  }
  const bool uniform_rates =
      !spec.rates.empty() && std::all_of(spec.rates.begin(), spec.rates.end(),
                                         [&](double r) { return r == spec.rates.front(); });
  const bool uniform_shifts =
      spec.shifts.empty() || std::all_of(spec.shifts.begin(), spec.shifts.end(),
                                         [&](std::int64_t v) { return v == spec.shifts.front(); });
  if (!uniform_rates || !uniform_shifts) {
    throw Error(ErrorCode::DimensionMismatch, "generator has " + std::to_string(spec.dim()) +
                                                  " coordinates, requested " + std::to_string(d));
  }
  GeneratorSpec out = spec;
  out.rates.assign(static_cast<std::size_t>(d), spec.rates.front());
  if (!spec.shifts.empty()) out.shifts.assign(static_cast<std::size_t>(d), spec.shifts.front());
  return out;
}

GeneratorSpec type_a_generator(double rate) {
  GeneratorSpec s;
  s.kind = GeneratorKind::PoissonIndependent;
  s.rates = {rate, rate};
  return s;
}

GeneratorSpec type_b_generator(double rate, double corr) {
  GeneratorSpec s;
  s.kind = GeneratorKind::PoissonCommonShock;
  s.rates = {rate, rate};
  s.target_corr = corr;
  return s;
}

GeneratorSpec type_c_generator(double rate, bool mixture) {
  GeneratorSpec s;
  s.kind = mixture ? GeneratorKind::PoissonRandomShiftMixture : GeneratorKind::PoissonShifted;
  s.rates = {rate, rate};
  s.shifts = {6, -6};
  return s;
}

GeneratorSpec generator_for(const GeneratorSpec& family, const ModelParams& p) {
  GeneratorSpec out = family;
  if (family.kind == GeneratorKind::EmpiricalDelta) return out;
  if (!p.gen_params.empty()) {
    out.rates = p.gen_params;
    if (out.rates.size() == 1 && p.dim > 1) out.rates.assign(static_cast<std::size_t>(p.dim), p.gen_params[0]);
  }
  out.target_corr = family.kind == GeneratorKind::PoissonIndependent ? 0.0 : std::max(0.0, p.rho);
  if (!out.shifts.empty() && out.shifts.size() != out.rates.size()) {
    throw Error(ErrorCode::DimensionMismatch, "family shifts do not match parameter dimension");
  }
  return out;
}

// ---------------------------------------------------------------------------

CountSample::CountSample(std::size_t rows, std::size_t cols) : cols_(cols), values_(rows * cols, 0) {}

CountSample::CountSample(std::size_t cols, std::vector<std::int64_t> values)
    : cols_(cols), values_(std::move(values)) {
  if (cols_ == 0 && !values_.empty()) throw Error(ErrorCode::DimensionMismatch, "zero columns");
  if (cols_ != 0 && values_.size() % cols_ != 0) {
    throw Error(ErrorCode::DimensionMismatch, "value count is not a multiple of the column count");
  }
}

std::vector<std::int64_t> CountSample::column(std::size_t c) const {
  std::vector<std::int64_t> out(rows());
  for (std::size_t r = 0; r < out.size(); ++r) out[r] = (*this)(r, c);
  return out;
}

void CountSample::append_row(std::span<const std::int64_t> row) {
  if (cols_ == 0) cols_ = row.size();
  if (row.size() != cols_) throw Error(ErrorCode::DimensionMismatch, "row width differs from sample width");
  values_.insert(values_.end(), row.begin(), row.end());
}

void CountSample::append(const CountSample& other) {
  if (other.empty()) return;
  if (cols_ == 0) cols_ = other.cols_;
  if (other.cols_ != cols_) throw Error(ErrorCode::DimensionMismatch, "cannot append samples of different width");
  values_.insert(values_.end(), other.values_.begin(), other.values_.end());
}

void validate_gamma(const GammaParams& g) {
  if (!(g.alpha > 0.0) || !(g.beta > 0.0) || !std::isfinite(g.alpha) || !std::isfinite(g.beta)) {
    throw Error(ErrorCode::InvalidArgument, "gamma shape and rate must be positive");
  }
}

std::int64_t LinearConstraint::row_sum(std::size_t i) const {
  return std::accumulate(matrix_a[i].begin(), matrix_a[i].end(), std::int64_t{0});
}

LinearConstraint LinearConstraint::identity(int d, std::vector<std::int64_t> m) {
  LinearConstraint c;
  c.matrix_a.assign(static_cast<std::size_t>(d), std::vector<std::int64_t>(static_cast<std::size_t>(d), 0));
  for (int i = 0; i < d; ++i) c.matrix_a[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)] = 1;
  c.threshold_m = std::move(m);
  return c;
}

void validate_constraint(const LinearConstraint& c) {
  if (c.matrix_a.empty()) throw Error(ErrorCode::InvalidArgument, "constraint matrix is empty");
  if (c.threshold_m.size() != c.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "threshold length must equal the number of matrix rows");
  }
  for (std::size_t i = 0; i < c.rows(); ++i) {
    if (c.matrix_a[i].size() != c.cols()) throw Error(ErrorCode::DimensionMismatch, "ragged constraint matrix");
    for (auto a : c.matrix_a[i]) {
      if (a < 0) throw Error(ErrorCode::InvalidArgument, "constraint matrix must be nonnegative");
    }
    if (c.row_sum(i) <= 0) {
      throw Error(ErrorCode::InvalidArgument, "row " + std::to_string(i) + " of the constraint matrix is zero");
    }
    if (c.threshold_m[i] < 0) throw Error(ErrorCode::InvalidArgument, "threshold must be nonnegative");
  }
}

}  // namespace mdgpd
