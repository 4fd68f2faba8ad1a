#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "mdgpd/analytics.hpp"
#include "mdgpd/checks.hpp"
#include "mdgpd/dryspells.hpp"
#include "mdgpd/io.hpp"
#include "mdgpd/metrics.hpp"
#include "mdgpd/nbe.hpp"
#include "mdgpd/samplers.hpp"
#include "mdgpd/spectral.hpp"
#include "mdgpd/study.hpp"

namespace fs = std::filesystem;
using namespace mdgpd;

namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string config;
  std::string out = ".";
};

// Exit codes: 1 runtime failure, 2 bad configuration or input, 3 I/O.
int exit_code(const Error& e) {
  switch (e.code()) {
    case ErrorCode::Io: return 3;
    case ErrorCode::Config:
    case ErrorCode::InvalidArgument:
    case ErrorCode::DimensionMismatch:
    case ErrorCode::UnsupportedSpec:
    case ErrorCode::NonPositiveScale:
    case ErrorCode::RhoOutOfRange:
    case ErrorCode::InvalidPmf: return 2;
    default: return 1;
  }
}

void log(const std::string& line) { std::cerr << "mdgpd: " << line << '\n'; }

Json load_config(const Globals& g) { return g.config.empty() ? Json::object() : read_json_file(g.config); }

std::uint64_t seed_of(const Globals& g, const Json& cfg) {
  if (g.seed) return *g.seed;
  return cfg.value("seed", std::uint64_t{1});
}

fs::path output_dir(const Globals& g) {
  fs::create_directories(g.out);
  return g.out;
}

template <typename T>
T get_or(const Json& cfg, const char* key, T fallback) {
  try {
    return cfg.contains(key) ? cfg.at(key).get<T>() : fallback;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Config, std::string("config field '") + key + "': " + e.what());
  }
}

GeneratorSpec generator_of(const Json& cfg) {
  if (!cfg.contains("generator")) return type_a_generator();
  try {
    return cfg.at("generator").get<GeneratorSpec>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Config, std::string("generator: ") + e.what());
  }
}

std::optional<ModelParams> params_of(const Json& cfg) {
  if (!cfg.contains("params")) return std::nullopt;
  try {
    return cfg.at("params").get<ModelParams>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Config, std::string("params: ") + e.what());
  }
}

std::vector<std::string> column_names(std::size_t d) {
  std::vector<std::string> out;
  for (std::size_t i = 1; i <= d; ++i) out.push_back("n" + std::to_string(i));
  return out;
}

// ---- simulate -----------------------------------------------------------------

struct SimulateArgs {
  std::optional<std::size_t> n;
  std::optional<int> d;
  std::string model;
  std::string output;
};

int cmd_simulate(const Globals& g, const SimulateArgs& a) {
  const auto cfg = load_config(g);
  const auto spec = generator_of(cfg);
  const auto params = params_of(cfg);
  const auto n = a.n.value_or(get_or<std::size_t>(cfg, "n", 1000));
  const auto model = !a.model.empty() ? a.model : get_or<std::string>(cfg, "model", params ? "mdgpd" : "standard");
  auto rs = RandomStream(seed_of(g, cfg), "simulate");
  CountSample out;
  if (model == "standard") {
    const int d = a.d.value_or(get_or<int>(cfg, "d", spec.dim() > 0 ? spec.dim() : 2));
    out = d == 2 ? sample_standard_mdgpd(spec, rs, n) : sample_standard_mdgpd_d(spec, rs, n, d);
    if (n == 0) out = CountSample(static_cast<std::size_t>(d), std::vector<std::int64_t>{});
  } else {
    if (!params) throw Error(ErrorCode::Config, "model '" + model + "' needs params");
    if (a.d && *a.d != params->dim) {
      throw Error(ErrorCode::DimensionMismatch, "--d " + std::to_string(*a.d) + " differs from params dim " +
                                                    std::to_string(params->dim));
    }
    const auto gen = generator_for(spec, *params);
    if (model == "mdgpd") {
      out = sample_nonstandard_mdgpd(gen, *params, rs, n);
    } else if (model == "discretized_mgpd") {
      out = sample_discretized_mgpd(gen, *params, rs, n, Rounding::Floor);
    } else {
      throw Error(ErrorCode::Config, "unknown model '" + model + "'");
    }
    if (n == 0) out = CountSample(static_cast<std::size_t>(params->dim), std::vector<std::int64_t>{});
  }
  const fs::path path = !a.output.empty() ? fs::path(a.output) : output_dir(g) / get_or<std::string>(cfg, "output", "simulate.csv");
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_count_csv(path, out, column_names(out.cols()));
  log("wrote " + std::to_string(out.rows()) + " draws to " + path.string());
  return 0;
}

// ---- eval ---------------------------------------------------------------------

struct EvalArgs {
  std::string table;
  std::string data;
};

std::pair<std::int64_t, std::int64_t> range_of(const Json& cfg, const char* key, std::int64_t lo, std::int64_t hi) {
  const auto v = get_or<std::vector<std::int64_t>>(cfg, key, {lo, hi});
  if (v.size() != 2 || v[0] > v[1]) throw Error(ErrorCode::Config, std::string(key) + " must be [lo, hi] with lo <= hi");
  return {v[0], v[1]};
}

int cmd_eval(const Globals& g, const EvalArgs& a) {
  const auto cfg = load_config(g);
  const auto spec = generator_of(cfg);
  const auto params = params_of(cfg);
  const auto model = get_or<std::string>(cfg, "model", params ? "mdgpd" : "standard");
  const auto table = !a.table.empty() ? a.table : get_or<std::string>(cfg, "table", "cdf");
  if (model != "standard" && !params) throw Error(ErrorCode::Config, "model '" + model + "' needs params");
  if (model != "standard" && model != "mdgpd" && model != "discretized_mgpd") {
    throw Error(ErrorCode::Config, "unknown model '" + model + "'");
  }
  const auto gen = params ? generator_for(spec, *params) : spec;
  const auto s = build_spectral(gen, 2);
  const auto dir = output_dir(g);

  if (table == "qq") {
    const auto data_path = !a.data.empty() ? a.data : get_or<std::string>(cfg, "data", "");
    if (data_path.empty()) throw Error(ErrorCode::Config, "qq needs a data CSV");
    const auto data = read_count_csv(data_path);
    const int which = get_or<int>(cfg, "coordinate", 1) - 1;
    if (which < 0 || static_cast<std::size_t>(which) >= data.cols()) throw Error(ErrorCode::Config, "bad coordinate");
    std::optional<DeltaPmf> delta;
    if (model == "standard") delta = delta_pmf_from_spec(gen);
    auto cdf = [&](std::int64_t k) {
      if (model == "standard") return marginal_cdf(k, which, *delta);
      if (model == "mdgpd") return marginal_cdf_nonstandard(k, which, *params, s);
      return marginal_cdf_discretized(k, which, *params, s);
    };
    const auto col = data.column(static_cast<std::size_t>(which));
    const auto lowest = *std::min_element(col.begin(), col.end());
    std::ofstream out(dir / "eval_qq.csv");
    out << "level,qa,qb\n";
    for (int i = 1; i <= 99; ++i) {
      const double level = i / 100.0;
      std::int64_t k = std::min<std::int64_t>(lowest, 0) - 64;
      while (cdf(k) < level) ++k;
      out << format_double(level) << ',' << empirical_quantile(col, level) << ',' << k << '\n';
    }
    log("wrote " + (dir / "eval_qq.csv").string());
    return 0;
  }
  if (table != "cdf" && table != "pmf") throw Error(ErrorCode::Config, "unknown table '" + table + "'");
  const std::int64_t lo_default = model == "standard" ? -5 : 0;
  const auto [a1, b1] = range_of(cfg, "k1", lo_default, 10);
  const auto [a2, b2] = range_of(cfg, "k2", lo_default, 10);
  auto value = [&](std::span<const std::int64_t> k) {
    const bool cdf = table == "cdf";
    if (model == "standard") return cdf ? cdf_standard(k, s) : pmf_standard(k, s);
    if (model == "mdgpd") return cdf ? cdf_nonstandard(k, *params, s) : pmf_nonstandard(k, *params, s);
    if (!cdf) return pmf_discretized(k, *params, s);
    // floor(X) <= k exactly when ceil(X) <= k + 1.
    const std::vector<std::int64_t> up{k[0] + 1, k[1] + 1};
    return cdf_nonstandard(up, *params, s);
  };
  const auto path = dir / ("eval_" + table + ".csv");
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << "k1,k2,value\n";
  for (std::int64_t k1 = a1; k1 <= b1; ++k1) {
    for (std::int64_t k2 = a2; k2 <= b2; ++k2) {
      const std::vector<std::int64_t> k{k1, k2};
      out << k1 << ',' << k2 << ',' << format_double(value(k)) << '\n';
    }
  }
  log("wrote " + path.string());
  return 0;
}

// ---- fit ----------------------------------------------------------------------

struct FitArgs {
  std::string data;
  std::string estimator;
  std::optional<std::size_t> bootstrap;
};

int cmd_fit(const Globals& g, const FitArgs& a) {
  const auto cfg = load_config(g);
  const auto data_path = !a.data.empty() ? a.data : get_or<std::string>(cfg, "data", "");
  if (data_path.empty()) throw Error(ErrorCode::Config, "fit needs a data CSV");
  const auto data = read_count_csv(data_path);
  if (data.rows() == 0) throw Error(ErrorCode::EmptyInput, data_path + " has no rows");
  const auto seed = seed_of(g, cfg);
  const auto dir = output_dir(g);
  const fs::path est_path =
      !a.estimator.empty() ? fs::path(a.estimator) : fs::path(get_or<std::string>(cfg, "estimator", (dir / "estimator.json").string()));

  nbe::NeuralEstimator est;
  if (fs::exists(est_path)) {
    est = nbe::NeuralEstimator::load(est_path);
    log("reusing saved estimator " + est_path.string() + "; no training step");
  } else {
    const nbe::Family fam{generator_of(cfg), nbe::discrete_model_from_string(get_or<std::string>(cfg, "model", "mdgpd")),
                          static_cast<int>(data.cols())};
    auto base = nbe::TrainingConfig{};
    base.m = data.rows();
    base.seed = seed;
    const auto tc = nbe::training_config_from_json(cfg.value("training", Json::object()), base);
    const auto prior = nbe::prior_from_json(cfg.value("prior", Json::object()), nbe::default_prior(fam.generator.kind));
    log("training estimator (" + std::to_string(tc.epochs) + " epochs of K=" + std::to_string(tc.k) + ")");
    const auto r = nbe::train(fam, prior, tc);
    log("trained in " + format_double(std::round(r.seconds * 10) / 10) + " s, holdout risk " +
        format_double(r.holdout_risk) + " vs prior-mean " + format_double(r.prior_mean_risk));
    est = r.estimator;
    if (est_path.has_parent_path()) fs::create_directories(est_path.parent_path());
    est.save(est_path);
    log("saved estimator to " + est_path.string());
  }
  const auto theta = nbe::estimate(est, data);
  auto boot = RandomStream(seed, "fit").split("bootstrap");
  const auto b = a.bootstrap.value_or(get_or<std::size_t>(cfg, "bootstrap", 200));
  const auto report = nbe::parametric_bootstrap(est, theta, data.rows(), boot, b);
  nbe::write_estimates_csv(dir / "estimates.csv", report);
  log("wrote " + (dir / "estimates.csv").string());
  return 0;
}

// ---- study --------------------------------------------------------------------

struct StudyArgs {
  std::optional<std::size_t> reps;
  std::optional<std::size_t> n;
  std::string estimators;
};

std::vector<study::StudyCase> cases_of(const Json& cfg) {
  if (!cfg.contains("cases")) return study::default_cases();
  std::vector<study::StudyCase> out;
  for (const auto& c : cfg.at("cases")) {
    try {
      out.push_back({c.at("label").get<std::string>(), c.at("generator").get<GeneratorSpec>(),
                     c.at("truth").get<ModelParams>()});
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::Config, std::string("cases: ") + e.what());
    }
  }
  return out;
}

int cmd_study(const Globals& g, const StudyArgs& a) {
  const auto cfg = load_config(g);
  const auto seed = seed_of(g, cfg);
  const auto n = a.n.value_or(get_or<std::size_t>(cfg, "n", 1000));
  const auto reps = a.reps.value_or(get_or<std::size_t>(cfg, "reps", 1));
  if (reps < 1) throw Error(ErrorCode::Config, "reps must be at least 1");
  const auto tc = nbe::training_config_from_json(cfg.value("training", Json::object()));
  const auto dir = output_dir(g);
  const fs::path est_dir = !a.estimators.empty() ? fs::path(a.estimators)
                                                   : fs::path(get_or<std::string>(cfg, "estimators", (dir / "estimators").string()));

  study::StudyReport report;
  report.n = n;
  std::ofstream per_rep;
  if (reps > 1) {
    per_rep.open(dir / "study_reps.csv");
    per_rep << "generator,rep,ks_discretized,ks_mdgpd,loglik_total_discretized,loglik_total_mdgpd\n";
  }
  for (const auto& c : cases_of(cfg)) {
    const auto est = study::estimators_for(c, tc, est_dir, log);
    std::size_t ks_wins = 0, ll_wins = 0;
    for (std::size_t r = 0; r < reps; ++r) {
      auto rs = RandomStream(seed, "study").split(c.label).split("rep", r);
      auto res = study::run_case(c, est, n, rs);
      ks_wins += res.mdgpd.ks < res.discretized.ks ? 1 : 0;
      ll_wins += res.mdgpd.log_likelihood > res.discretized.log_likelihood ? 1 : 0;
      if (per_rep.is_open()) {
        per_rep << c.label << ',' << r << ',' << format_double(res.discretized.ks) << ',' << format_double(res.mdgpd.ks)
                << ',' << format_double(res.discretized.log_likelihood) << ','
                << format_double(res.mdgpd.log_likelihood) << '\n';
      }
      if (r == 0) report.cases.push_back(std::move(res));
    }
    log("type " + c.label + ": MDGPD has the smaller KS in " + std::to_string(ks_wins) + "/" + std::to_string(reps) +
        " and the larger log-likelihood in " + std::to_string(ll_wins) + "/" + std::to_string(reps));
  }
  study::write_report_csv(dir / "study.csv", report);
  log("wrote " + (dir / "study.csv").string());
  return 0;
}

// ---- dryspells ----------------------------------------------------------------

struct DryArgs {
  std::string input;
  std::string estimator;
};

dry::UnmatchedPolicy policy_of(const std::string& name) {
  if (name == "drop") return dry::UnmatchedPolicy::Drop;
  if (name == "zero_fill") return dry::UnmatchedPolicy::ZeroFill;
  throw Error(ErrorCode::Config, "unknown matching policy '" + name + "' (drop, zero_fill)");
}

int cmd_dryspells(const Globals& g, const DryArgs& a) {
  const auto cfg = load_config(g);
  const auto input = !a.input.empty() ? a.input : get_or<std::string>(cfg, "input", "");
  if (input.empty()) throw Error(ErrorCode::Config, "dryspells needs an input CSV");
  dry::PipelineConfig pc;
  pc.seed = seed_of(g, cfg);
  pc.wet_threshold_mm = get_or<double>(cfg, "wet_threshold_mm", pc.wet_threshold_mm);
  pc.quantile_level = get_or<double>(cfg, "quantile_level", pc.quantile_level);
  pc.policy = policy_of(get_or<std::string>(cfg, "policy", "drop"));
  if (cfg.contains("generator")) pc.generator = generator_kind_from_string(get_or<std::string>(cfg, "generator", ""));
  pc.bootstrap = get_or<std::size_t>(cfg, "bootstrap", pc.bootstrap);
  pc.training = nbe::training_config_from_json(cfg.value("training", Json::object()));
  const auto est_path = !a.estimator.empty() ? a.estimator : get_or<std::string>(cfg, "estimator", "");
  if (!est_path.empty() && fs::exists(est_path)) {
    pc.estimator_path = est_path;
    log("reusing saved estimator " + est_path + "; no training step");
  }
  const auto stations = dry::read_precip_csv(input);
  const auto r = dry::run_pipeline(stations, pc);
  const auto dir = output_dir(g);
  if (r.trained && !est_path.empty()) {
    r.estimator.save(est_path);
    log("saved estimator to " + est_path);
  }
  dry::write_pipeline_outputs(dir, r, pc.seed);
  log(std::to_string(r.pairs.exceedances.rows()) + " joint exceedances over (" + std::to_string(r.u1) + ", " +
      std::to_string(r.u2) + "), generator " + std::string(to_string(r.generator.kind)));
  log("wrote spells.csv, pairs.csv, delta.csv, estimates.csv, qq.csv to " + dir.string());
  return 0;
}

// ---- selftest -----------------------------------------------------------------

int cmd_selftest(const Globals& g, bool full, const std::string& estimators) {
  checks::Options opt;
  opt.full = full;
  if (g.seed) opt.seed = *g.seed;
  if (!estimators.empty()) opt.estimator_dir = estimators;
  opt.log = log;
  int failed = 0;
  checks::run_all(opt, [&](const checks::Result& r) {
    std::cout << checks::format_result(r) << std::endl;
    failed += r.passed ? 0 : 1;
  });
  std::cout << (failed == 0 ? "selftest passed" : "selftest failed: " + std::to_string(failed) + " check(s)") << '\n';
  return failed == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multivariate discrete generalized Pareto models: simulation, evaluation, neural estimation"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "random seed (overrides the config)");
  app.add_option("--config", g.config, "JSON config file");
  app.add_option("--out", g.out, "output directory")->capture_default_str();

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "draw samples to CSV (n1,n2[,n3...])");
  simulate->add_option("--n", sim.n, "number of draws");
  simulate->add_option("--d", sim.d, "dimension (standard model)")->check(CLI::Range(1, 64));
  simulate->add_option("--model", sim.model, "standard, mdgpd or discretized_mgpd");
  simulate->add_option("--output", sim.output, "CSV path (default <out>/simulate.csv)");

  EvalArgs ev;
  auto* eval = app.add_subcommand("eval", "analytic cdf/pmf tables (k1,k2,value) or Q-Q (level,qa,qb)");
  eval->add_option("--table", ev.table, "cdf, pmf or qq");
  eval->add_option("--data", ev.data, "observed CSV for qq");

  FitArgs fit_args;
  auto* fit = app.add_subcommand("fit", "neural Bayes estimate with bootstrap intervals");
  fit->add_option("--data", fit_args.data, "observed CSV");
  fit->add_option("--estimator", fit_args.estimator, "weights file; loaded when present, else trained and saved");
  fit->add_option("--bootstrap", fit_args.bootstrap, "bootstrap replicates");

  StudyArgs st;
  auto* study_cmd = app.add_subcommand("study", "MDGPD against discretized MGPD on simulated data");
  study_cmd->add_option("--reps", st.reps, "seeded repetitions per generator type");
  study_cmd->add_option("--n", st.n, "samples per scenario");
  study_cmd->add_option("--estimators", st.estimators, "estimator cache directory");

  DryArgs da;
  auto* dryspells = app.add_subcommand("dryspells", "dry-spell extraction and bivariate fit");
  dryspells->add_option("--input", da.input, "date,station,precip_mm CSV");
  dryspells->add_option("--estimator", da.estimator, "weights file; loaded when present");

  bool full = false;
  std::string selftest_cache;
  auto* selftest = app.add_subcommand("selftest", "property suite; nonzero exit on any failure");
  selftest->add_flag("--full", full, "include the training-based checks");
  selftest->add_option("--estimators", selftest_cache, "estimator cache directory");

  for (auto* sub : app.get_subcommands({})) sub->fallthrough();
  CLI11_PARSE(app, argc, argv);

  try {
    if (*simulate) return cmd_simulate(g, sim);
    if (*eval) return cmd_eval(g, ev);
    if (*fit) return cmd_fit(g, fit_args);
    if (*study_cmd) return cmd_study(g, st);
    if (*dryspells) return cmd_dryspells(g, da);
    if (*selftest) return cmd_selftest(g, full, selftest_cache);
  } catch (const Error& e) {
    std::cerr << "mdgpd: error: " << e.what() << '\n';
    return exit_code(e);
  } catch (const std::exception& e) {
    std::cerr << "mdgpd: error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
