#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mdgpd/analytics.hpp"
#include "mdgpd/core.hpp"
#include "mdgpd/io.hpp"
#include "mdgpd/random.hpp"

namespace mdgpd::nbe {

struct Range {
  double lo = 0.0;
  double hi = 0.0;
  [[nodiscard]] double width() const { return hi - lo; }
  [[nodiscard]] double mid() const { return 0.5 * (lo + hi); }
};

/// Independent uniform prior on every coordinate of theta. A range with
/// lo == hi pins that parameter.
struct Prior {
  Range sigma{0.5, 5.0};
  Range xi{-0.4, 0.5};
  Range rho{0.0, 0.99};
  Range rate{0.5, 2.0};
};

void validate_prior(const Prior& prior);

/// Default prior with rho pinned at 0 for families without a common shock.
Prior default_prior(GeneratorKind kind);

/// What the estimator is trained to invert: generator family, discrete model
/// (direct MDGPD or floor-discretized MGPD) and dimension.
struct Family {
  GeneratorSpec generator = type_a_generator();
  DiscreteModel model = DiscreteModel::Mdgpd;
  int dim = 2;
};

std::string_view to_string(DiscreteModel model);
DiscreteModel discrete_model_from_string(std::string_view name);

/// Flattened theta: sigma_1..d, xi_1..d, rho, lambda_1..d.
std::size_t param_count(int dim);
std::vector<std::string> param_names(int dim);
std::vector<double> to_vector(const ModelParams& p);
ModelParams from_vector(std::span<const double> theta, int dim);

/// Independent uniform draws, no family constraint.
std::vector<ModelParams> sample_prior(const Prior& prior, RandomStream& stream, std::size_t k, int dim = 2);
/// Draws restricted to parameters the family's generator accepts (redraws
/// otherwise, e.g. when the common rate would exceed a component rate).
std::vector<ModelParams> sample_prior(const Prior& prior, const Family& family, RandomStream& stream,
                                      std::size_t k);

/// One dataset of m replicates drawn at theta.
CountSample simulate_dataset(const Family& family, const ModelParams& theta, RandomStream& stream, std::size_t m);

struct TrainingConfig {
  std::size_t k = 2000;  // prior draws per epoch
  std::size_t j = 1;     // datasets per draw
  std::size_t m = 1000;  // replicates per dataset
  std::size_t epochs = 40;
  double step_size = 2e-3;
  std::size_t batch_size = 16;
  std::uint64_t seed = 1;
  /// Fresh prior draws and datasets every this many epochs (0: simulate once).
  std::size_t refresh_every = 1;
  std::size_t holdout = 400;
};

void validate_config(const TrainingConfig& config);

/// Fields present in `j` override `base`: sigma_range, xi_range, rho_range,
/// rate_range as [lo, hi] pairs.
Prior prior_from_json(const Json& j, Prior base);
/// Fields k, j, m, epochs, step_size, batch_size, seed, refresh_every,
/// holdout override `base`. Throws Config or InvalidArgument.
TrainingConfig training_config_from_json(const Json& j, TrainingConfig base = {});
Json to_json(const TrainingConfig& config);

struct TrainingItem {
  ModelParams theta;
  CountSample data;
};

/// For each theta, config.j datasets of config.m replicates.
std::vector<TrainingItem> simulate_training_batch(const std::vector<ModelParams>& thetas, const Family& family,
                                                  const TrainingConfig& config, RandomStream& stream);

enum class Activation { Identity, Tanh };
enum class LinkMode { Constrained, Identity };

struct Architecture {
  std::vector<int> psi_hidden{64, 64};
  int q = 32;
  std::vector<int> phi_hidden{64, 64};
  Activation activation = Activation::Tanh;
  LinkMode links = LinkMode::Constrained;
};

/// Dataset reduced to distinct rows with their frequencies. Inputs are mapped
/// through sign(x) log1p(|x|) so heavy tails stay on a usable scale.
struct EncodedData {
  Eigen::MatrixXd x;  // d x U
  Eigen::VectorXd w;  // U, sums to one
};

EncodedData encode(const CountSample& data);

struct LayerShape {
  int in = 0;
  int out = 0;
  Activation activation = Activation::Identity;
  std::size_t offset = 0;  // position of W (column-major) then b in the flat vector
};

/// DeepSets estimator phi(mean_r psi(x_r)) followed by per-parameter links.
class NeuralEstimator {
 public:
  NeuralEstimator() = default;
  NeuralEstimator(const Family& family, const Prior& prior, const Architecture& arch, RandomStream& init);

  [[nodiscard]] int dim() const { return family_.dim; }
  [[nodiscard]] std::size_t output_size() const { return param_count(family_.dim); }
  [[nodiscard]] const Family& family() const { return family_; }
  [[nodiscard]] const Prior& prior() const { return prior_; }
  [[nodiscard]] const Architecture& architecture() const { return arch_; }
  [[nodiscard]] const std::vector<LayerShape>& psi_layers() const { return psi_; }
  [[nodiscard]] const std::vector<LayerShape>& phi_layers() const { return phi_; }

  [[nodiscard]] const Eigen::VectorXd& parameters() const { return params_; }
  void set_parameters(const Eigen::VectorXd& params);
  [[nodiscard]] std::size_t parameter_count() const { return static_cast<std::size_t>(params_.size()); }

  /// Throws DimensionMismatch when the data width differs from dim().
  [[nodiscard]] std::vector<double> forward(const CountSample& data) const;
  [[nodiscard]] std::vector<double> forward(const EncodedData& data) const;

  /// Standardized squared-error loss at theta_true; `grad` receives dL/dparams.
  double loss_and_gradient(const EncodedData& data, std::span<const double> theta_true, Eigen::VectorXd& grad) const;

  [[nodiscard]] Json to_json() const;
  static NeuralEstimator from_json(const Json& j);
  void save(const std::filesystem::path& path) const;
  static NeuralEstimator load(const std::filesystem::path& path);

 private:
  std::vector<double> apply_links(const Eigen::VectorXd& z, Eigen::VectorXd* dlink) const;

  Family family_;
  Prior prior_;
  Architecture arch_;
  std::vector<LayerShape> psi_;
  std::vector<LayerShape> phi_;
  Eigen::VectorXd params_;
};

/// Sum of squared differences, each coordinate divided by its prior width.
/// Pinned coordinates (zero width) carry no weight.
double loss(std::span<const double> theta_true, std::span<const double> theta_hat, const Prior& prior, int dim);

struct TrainResult {
  NeuralEstimator estimator;
  std::vector<double> epoch_loss;
  double holdout_risk = 0.0;
  double prior_mean_risk = 0.0;
  double seconds = 0.0;
};

/// Adam on minibatches of simulated datasets. Throws NonFiniteLoss naming the
/// epoch when the running loss stops being finite.
TrainResult train(const Family& family, const Prior& prior, const TrainingConfig& config,
                  const Architecture& arch = {});

/// Max over weights of |analytic - central difference| / max(|analytic|, |fd|, 1e-6), step h.
double gradient_check(const NeuralEstimator& estimator, const CountSample& data, std::span<const double> theta_true,
                      double h = 1e-6);

ModelParams estimate(const NeuralEstimator& estimator, const CountSample& data);

struct EstimateReport {
  ModelParams theta_hat;
  std::vector<double> ci_lower;
  std::vector<double> ci_upper;
  std::vector<double> rmse;
  std::size_t n_bootstrap = 0;
};

/// Percentile intervals (2.5%, 97.5%) and RMSE around theta_hat from datasets of
/// size m simulated at theta_hat, one child stream per replicate.
EstimateReport parametric_bootstrap(const NeuralEstimator& estimator, const ModelParams& theta_hat, std::size_t m,
                                    RandomStream& stream, std::size_t b);
/// Same with caller-provided replicate streams.
EstimateReport parametric_bootstrap(const NeuralEstimator& estimator, const ModelParams& theta_hat, std::size_t m,
                                    std::vector<RandomStream> streams);

/// `param,estimate,ci_lo,ci_hi,rmse`, one row per parameter.
void write_estimates_csv(const std::filesystem::path& path, const EstimateReport& report);

/// Linear-interpolation empirical quantile of unsorted values.
double percentile(std::vector<double> values, double level);

}  // namespace mdgpd::nbe
