#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mdgpd/core.hpp"
#include "mdgpd/nbe.hpp"

namespace mdgpd::study {

/// One generator family of the simulation study with its true parameters.
struct StudyCase {
  std::string label;  // "a", "b", "c"
  GeneratorSpec generator;
  ModelParams truth;
};

/// The three cases of the comparison table: independent, common shock and
/// bimodal shifted Poisson generators.
std::vector<StudyCase> default_cases();

/// Goodness of fit of one fitted model on one dataset.
struct FitQuality {
  ModelParams estimate;
  double log_likelihood = 0.0;  // marginal log-likelihood total; -inf when a value has zero mass
  double ks = 0.0;              // max over coordinates of the marginal KS distance
};

/// KS and log-likelihood of `params` under `model` on `data`.
FitQuality assess_fit(const CountSample& data, const GeneratorSpec& generator, const ModelParams& params,
                      DiscreteModel model);

struct CaseResult {
  StudyCase study_case;
  ModelParams discretized_on_scenario_i;  // discretized-MGPD estimator on floor(X) data
  ModelParams mdgpd_on_scenario_ii;       // MDGPD estimator on direct MDGPD data
  FitQuality discretized;                 // both estimators refit and judged on the scenario (ii) data
  FitQuality mdgpd;
};

struct StudyReport {
  std::vector<CaseResult> cases;
  std::size_t n = 0;
};

/// Trained estimators for one case, one per discrete model.
struct CaseEstimators {
  nbe::NeuralEstimator discretized;
  nbe::NeuralEstimator mdgpd;
};

/// Loads `<dir>/type_<label>_<model>.json` when present, otherwise trains and
/// (when dir is set) saves. `log` receives one line per estimator.
CaseEstimators estimators_for(const StudyCase& c, const nbe::TrainingConfig& config,
                              const std::optional<std::filesystem::path>& dir,
                              const std::function<void(const std::string&)>& log = {});

/// Simulates n rows per scenario at the case truth and fits both models.
CaseResult run_case(const StudyCase& c, const CaseEstimators& est, std::size_t n, RandomStream& stream);

/// 100 |est - true| / |true|; NaN when the truth is 0.
double relative_error_pct(double estimate, double truth);

/// Table layout: generator,param,true,discretized,mdgpd,rel_error_pct,
/// loglik_total_discretized,loglik_total_mdgpd,ks_discretized,ks_mdgpd.
void write_report_csv(const std::filesystem::path& path, const StudyReport& report);

}  // namespace mdgpd::study
