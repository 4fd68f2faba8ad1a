#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mdgpd {

// Truncation level for every "exact" enumeration over a Poisson support.
inline constexpr double kTailMass = 1e-12;
// Shape parameters closer to zero than this use the exponential-branch limit.
inline constexpr double kXiZero = 1e-9;

enum class ErrorCode {
  NonPositiveScale,
  RhoOutOfRange,
  DimensionMismatch,
  UnsupportedSpec,
  DimensionTooSmall,
  EmptyInput,
  InvalidPmf,
  InvalidArgument,
  DegenerateConditioning,
  DegenerateDenominator,
  ZeroLikelihoodRow,
  NonFiniteLoss,
  EmptySeries,
  EmptySpellSet,
  MisalignedDates,
  Io,
  Config,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);
  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Full parameter vector of a (possibly non-standard) MDGPD family:
/// margins (sigma, xi), dependence share rho, and generator rates.
struct ModelParams {
  std::vector<double> sigma;
  std::vector<double> xi;
  double rho = 0.0;
  std::vector<double> gen_params;
  int dim = 2;

  bool operator==(const ModelParams&) const = default;
};

struct ValidationError {
  ErrorCode code;
  std::string field;
  std::string message;
};

std::optional<ValidationError> validate_params(const ModelParams& p);
void require_valid(const ModelParams& p);

/// Finite integer-supported pmf, e.g. the law of T1 - T2.
class DeltaPmf {
 public:
  /// Throws InvalidPmf unless support is strictly increasing, probs are
  /// nonnegative and sum to one within 1e-12.
  DeltaPmf(std::vector<std::int64_t> support, std::vector<double> probs);

  /// Normalizes arbitrary nonnegative weights; zero-weight points are dropped.
  static DeltaPmf from_weights(const std::map<std::int64_t, double>& weights);
  static DeltaPmf from_values(std::span<const std::int64_t> values);
  static DeltaPmf point_mass(std::int64_t at);

  [[nodiscard]] std::span<const std::int64_t> support() const { return support_; }
  [[nodiscard]] std::span<const double> probs() const { return probs_; }
  [[nodiscard]] std::size_t size() const { return support_.size(); }
  [[nodiscard]] double prob_at(std::int64_t k) const;
  [[nodiscard]] DeltaPmf negated() const;
  [[nodiscard]] double mean() const;

  bool operator==(const DeltaPmf&) const = default;

 private:
  std::vector<std::int64_t> support_;
  std::vector<double> probs_;
};

enum class GeneratorKind {
  PoissonIndependent,
  PoissonCommonShock,
  PoissonShifted,
  PoissonRandomShiftMixture,
  EmpiricalDelta,
};

std::string_view to_string(GeneratorKind kind);
GeneratorKind generator_kind_from_string(std::string_view name);

/// Description of the discrete generator T.
///
/// All Poisson kinds share one construction: T_i = C + U_i + shift_i with
/// C ~ Poisson(c), U_i ~ Poisson(rate_i - c) and c = target_corr times the
/// geometric mean of the rates (so corr(T1, T2) = target_corr exactly for
/// d = 2). PoissonIndependent requires target_corr = 0. The random-shift
/// mixture applies `shifts` or the reversed vector with probability 1/2 each.
/// EmpiricalDelta is bivariate only and realizes T = (Delta, 0).
struct GeneratorSpec {
  GeneratorKind kind = GeneratorKind::PoissonIndependent;
  std::vector<double> rates;
  std::vector<std::int64_t> shifts;
  double target_corr = 0.0;
  std::optional<DeltaPmf> delta_pmf;

  [[nodiscard]] int dim() const;
  /// Rate of the common component C (zero unless target_corr > 0).
  [[nodiscard]] double common_rate() const;
  /// Shift applied to coordinate i on the given mixture branch.
  [[nodiscard]] std::int64_t shift(int i, bool reversed = false) const;

  bool operator==(const GeneratorSpec&) const = default;
};

void validate_spec(const GeneratorSpec& spec);

/// Copy of `spec` broadcast to dimension d (single-rate specs only).
GeneratorSpec broadcast_spec(const GeneratorSpec& spec, int d);

// Generator types (a), (b), (c) with unit rates.
GeneratorSpec type_a_generator(double rate = 1.0);
GeneratorSpec type_b_generator(double rate = 1.0, double corr = 0.99);
GeneratorSpec type_c_generator(double rate = 1.0, bool mixture = true);

/// Replaces rates and dependence share of `family` with those carried by p.
GeneratorSpec generator_for(const GeneratorSpec& family, const ModelParams& p);

/// Row-major n x d matrix of integer observations.
class CountSample {
 public:
  CountSample() = default;
  CountSample(std::size_t rows, std::size_t cols);
  CountSample(std::size_t cols, std::vector<std::int64_t> values);

  [[nodiscard]] std::size_t rows() const { return cols_ == 0 ? 0 : values_.size() / cols_; }
  [[nodiscard]] std::size_t cols() const { return cols_; }
  [[nodiscard]] bool empty() const { return values_.empty(); }

  std::int64_t& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
  std::int64_t operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

  [[nodiscard]] std::span<const std::int64_t> row(std::size_t r) const {
    return {values_.data() + r * cols_, cols_};
  }
  [[nodiscard]] std::vector<std::int64_t> column(std::size_t c) const;
  [[nodiscard]] const std::vector<std::int64_t>& values() const { return values_; }

  void append_row(std::span<const std::int64_t> row);
  void append(const CountSample& other);

  bool operator==(const CountSample&) const = default;

 private:
  std::size_t cols_ = 0;
  std::vector<std::int64_t> values_;
};

struct GammaParams {
  double alpha = 1.0;
  double beta = 1.0;
};

void validate_gamma(const GammaParams& g);

/// A N <= m style constraint: nonnegative integer n x d matrix and threshold.
struct LinearConstraint {
  std::vector<std::vector<std::int64_t>> matrix_a;
  std::vector<std::int64_t> threshold_m;

  [[nodiscard]] std::size_t rows() const { return matrix_a.size(); }
  [[nodiscard]] std::size_t cols() const { return matrix_a.empty() ? 0 : matrix_a.front().size(); }
  [[nodiscard]] std::int64_t row_sum(std::size_t i) const;

  static LinearConstraint identity(int d, std::vector<std::int64_t> m);
};

void validate_constraint(const LinearConstraint& c);

/// Neumaier-compensated accumulator.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  [[nodiscard]] double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

}  // namespace mdgpd
