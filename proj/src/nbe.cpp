#include "mdgpd/nbe.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>

#include "mdgpd/samplers.hpp"

namespace mdgpd::nbe {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using ConstMat = Eigen::Map<const MatrixXd>;
using ConstVec = Eigen::Map<const VectorXd>;
using Mat = Eigen::Map<MatrixXd>;
using Vec = Eigen::Map<VectorXd>;

constexpr int kFormatVersion = 1;
constexpr const char* kFormatName = "mdgpd-nbe";

void check_range(const Range& r, const char* name) {
  if (!std::isfinite(r.lo) || !std::isfinite(r.hi) || r.lo > r.hi) {
    throw Error(ErrorCode::InvalidArgument, std::string("prior range '") + name + "' must satisfy lo <= hi");
  }
}

double draw(const Range& r, RandomStream& s) { return r.width() > 0.0 ? s.uniform(r.lo, r.hi) : r.lo; }

std::string_view activation_name(Activation a) { return a == Activation::Tanh ? "tanh" : "identity"; }

Activation activation_from_string(const std::string& s) {
  if (s == "tanh") return Activation::Tanh;
  if (s == "identity") return Activation::Identity;
  throw Error(ErrorCode::Config, "unknown activation '" + s + "'");
}

std::string_view link_name(LinkMode l) { return l == LinkMode::Constrained ? "constrained" : "identity"; }

LinkMode link_mode_from_string(const std::string& s) {
  if (s == "constrained") return LinkMode::Constrained;
  if (s == "identity") return LinkMode::Identity;
  throw Error(ErrorCode::Config, "unknown link mode '" + s + "'");
}

std::vector<LayerShape> chain(int in, const std::vector<int>& hidden, int out, Activation hidden_act,
                              Activation out_act, std::size_t& offset) {
  std::vector<LayerShape> layers;
  int prev = in;
  for (std::size_t i = 0; i <= hidden.size(); ++i) {
    const int width = i < hidden.size() ? hidden[i] : out;
    if (width < 1) throw Error(ErrorCode::InvalidArgument, "layer widths must be positive");
    layers.push_back({prev, width, i < hidden.size() ? hidden_act : out_act, offset});
    offset += static_cast<std::size_t>(width) * static_cast<std::size_t>(prev + 1);
    prev = width;
  }
  return layers;
}

// tanh via exp: Eigen vectorizes exp for doubles but not tanh.
template <typename Derived>
void tanh_inplace(Eigen::MatrixBase<Derived>& z) {
  z = (1.0 - 2.0 / ((2.0 * z.array()).exp() + 1.0)).matrix();
}

void apply_activation(Activation a, MatrixXd& z) {
  if (a == Activation::Tanh) tanh_inplace(z);
}

// d act / d z expressed through the activation output.
template <typename Derived>
auto activation_slope(Activation a, const Eigen::MatrixBase<Derived>& out) {
  using Scalar = typename Derived::Scalar;
  using Plain = typename Derived::PlainObject;
  if (a == Activation::Tanh) return Plain((Scalar(1) - out.array().square()).matrix());
  return Plain(Plain::Ones(out.rows(), out.cols()));
}

// Loss weights 1/width^2, zero for pinned coordinates.
std::vector<double> loss_weights(const Prior& prior, int dim) {
  std::vector<double> w;
  auto push = [&](const Range& r, int count) {
    const double width = r.width();
    for (int i = 0; i < count; ++i) w.push_back(width > 0.0 ? 1.0 / (width * width) : 0.0);
  };
  push(prior.sigma, dim);
  push(prior.xi, dim);
  push(prior.rho, 1);
  push(prior.rate, dim);
  return w;
}

double param_percentile_sorted(const std::vector<double>& s, double level) {
  if (s.size() == 1) return s.front();
  const double pos = level * static_cast<double>(s.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, s.size() - 1);
  return s[lo] + (pos - static_cast<double>(lo)) * (s[hi] - s[lo]);
}

}  // namespace

// ---------------------------------------------------------------------------
// Prior, family, theta layout

void validate_prior(const Prior& prior) {
  check_range(prior.sigma, "sigma_range");
  check_range(prior.xi, "xi_range");
  check_range(prior.rho, "rho_range");
  check_range(prior.rate, "rate_range");
  if (prior.sigma.lo <= 0.0) throw Error(ErrorCode::NonPositiveScale, "sigma_range must be positive");
  if (prior.rate.lo <= 0.0) throw Error(ErrorCode::InvalidArgument, "rate_range must be positive");
  if (prior.rho.lo <= -1.0 || prior.rho.hi >= 1.0) throw Error(ErrorCode::RhoOutOfRange, "rho_range must lie in (-1, 1)");
}

Prior default_prior(GeneratorKind kind) {
  Prior p;
  if (kind != GeneratorKind::PoissonCommonShock) p.rho = {0.0, 0.0};
  return p;
}

std::string_view to_string(DiscreteModel model) {
  return model == DiscreteModel::Mdgpd ? "mdgpd" : "discretized_mgpd";
}

DiscreteModel discrete_model_from_string(std::string_view name) {
  if (name == "mdgpd") return DiscreteModel::Mdgpd;
  if (name == "discretized_mgpd") return DiscreteModel::DiscretizedMgpd;
  throw Error(ErrorCode::Config, "unknown model '" + std::string(name) + "'");
}

std::size_t param_count(int dim) { return 3 * static_cast<std::size_t>(dim) + 1; }

std::vector<std::string> param_names(int dim) {
  std::vector<std::string> names;
  for (int i = 1; i <= dim; ++i) names.push_back("sigma" + std::to_string(i));
  for (int i = 1; i <= dim; ++i) names.push_back("xi" + std::to_string(i));
  names.emplace_back("rho");
  for (int i = 1; i <= dim; ++i) names.push_back("lambda" + std::to_string(i));
  return names;
}

std::vector<double> to_vector(const ModelParams& p) {
  std::vector<double> v(p.sigma);
  v.insert(v.end(), p.xi.begin(), p.xi.end());
  v.push_back(p.rho);
  v.insert(v.end(), p.gen_params.begin(), p.gen_params.end());
  if (v.size() != param_count(p.dim)) throw Error(ErrorCode::DimensionMismatch, "theta needs one rate per coordinate");
  return v;
}

ModelParams from_vector(std::span<const double> theta, int dim) {
  if (theta.size() != param_count(dim)) throw Error(ErrorCode::DimensionMismatch, "theta has the wrong length");
  const auto d = static_cast<std::size_t>(dim);
  ModelParams p;
  p.dim = dim;
  p.sigma.assign(theta.begin(), theta.begin() + static_cast<std::ptrdiff_t>(d));
  p.xi.assign(theta.begin() + static_cast<std::ptrdiff_t>(d), theta.begin() + static_cast<std::ptrdiff_t>(2 * d));
  p.rho = theta[2 * d];
  p.gen_params.assign(theta.begin() + static_cast<std::ptrdiff_t>(2 * d + 1), theta.end());
  return p;
}

std::vector<ModelParams> sample_prior(const Prior& prior, RandomStream& stream, std::size_t k, int dim) {
  validate_prior(prior);
  std::vector<ModelParams> out;
  out.reserve(k);
  for (std::size_t n = 0; n < k; ++n) {
    ModelParams p;
    p.dim = dim;
    for (int i = 0; i < dim; ++i) p.sigma.push_back(draw(prior.sigma, stream));
    for (int i = 0; i < dim; ++i) p.xi.push_back(draw(prior.xi, stream));
    p.rho = draw(prior.rho, stream);
    for (int i = 0; i < dim; ++i) p.gen_params.push_back(draw(prior.rate, stream));
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<ModelParams> sample_prior(const Prior& prior, const Family& family, RandomStream& stream,
                                      std::size_t k) {
  std::vector<ModelParams> out;
  out.reserve(k);
  while (out.size() < k) {
    for (int attempt = 0;; ++attempt) {
      if (attempt == 10000) throw Error(ErrorCode::InvalidArgument, "prior has no mass compatible with the family");
      auto p = std::move(sample_prior(prior, stream, 1, family.dim).front());
      try {
        validate_spec(generator_for(family.generator, p));
      } catch (const Error&) {
        continue;
      }
      out.push_back(std::move(p));
      break;
    }
  }
  return out;
}

CountSample simulate_dataset(const Family& family, const ModelParams& theta, RandomStream& stream, std::size_t m) {
  const auto gen = generator_for(family.generator, theta);
  if (family.model == DiscreteModel::Mdgpd) return sample_nonstandard_mdgpd(gen, theta, stream, m);
  return sample_discretized_mgpd(gen, theta, stream, m, Rounding::Floor);
}

void validate_config(const TrainingConfig& c) {
  if (c.k < 2) throw Error(ErrorCode::InvalidArgument, "K must exceed 1");
  if (c.j < 1 || c.m < 1) throw Error(ErrorCode::InvalidArgument, "J and m must be at least 1");
  if (c.batch_size < 1) throw Error(ErrorCode::InvalidArgument, "batch size must be at least 1");
  if (!(c.step_size > 0.0)) throw Error(ErrorCode::InvalidArgument, "step size must be positive");
}

std::vector<TrainingItem> simulate_training_batch(const std::vector<ModelParams>& thetas, const Family& family,
                                                  const TrainingConfig& config, RandomStream& stream) {
  validate_config(config);
  std::vector<TrainingItem> items;
  items.reserve(thetas.size() * config.j);
  for (std::size_t k = 0; k < thetas.size(); ++k) {
    const auto per_theta = stream.split("theta", k);
    for (std::size_t j = 0; j < config.j; ++j) {
      auto s = per_theta.split("dataset", j);
      items.push_back({thetas[k], simulate_dataset(family, thetas[k], s, config.m)});
    }
  }
  return items;
}

// ---------------------------------------------------------------------------
// Network

EncodedData encode(const CountSample& data) {
  if (data.rows() == 0) throw Error(ErrorCode::EmptyInput, "dataset has no rows");
  std::map<std::vector<std::int64_t>, std::size_t> counts;
  for (std::size_t r = 0; r < data.rows(); ++r) {
    const auto row = data.row(r);
    ++counts[std::vector<std::int64_t>(row.begin(), row.end())];
  }
  EncodedData e;
  e.x.resize(static_cast<Eigen::Index>(data.cols()), static_cast<Eigen::Index>(counts.size()));
  e.w.resize(static_cast<Eigen::Index>(counts.size()));
  Eigen::Index u = 0;
  const double n = static_cast<double>(data.rows());
  for (const auto& [row, c] : counts) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      const double v = static_cast<double>(row[i]);
      e.x(static_cast<Eigen::Index>(i), u) = std::copysign(std::log1p(std::abs(v)), v);
    }
    e.w(u++) = static_cast<double>(c) / n;
  }
  return e;
}

NeuralEstimator::NeuralEstimator(const Family& family, const Prior& prior, const Architecture& arch,
                                 RandomStream& init)
    : family_(family), prior_(prior), arch_(arch) {
  validate_prior(prior);
  if (family.dim < 1) throw Error(ErrorCode::DimensionMismatch, "dimension must be positive");
  if (arch.q < 1) throw Error(ErrorCode::InvalidArgument, "q must be at least 1");
  std::size_t offset = 0;
  psi_ = chain(family.dim, arch.psi_hidden, arch.q, arch.activation, arch.activation, offset);
  phi_ = chain(arch.q, arch.phi_hidden, static_cast<int>(output_size()), arch.activation, Activation::Identity,
               offset);
  params_ = VectorXd::Zero(static_cast<Eigen::Index>(offset));
  auto fill = [&](const LayerShape& l, double gain) {
    const double sd = gain * std::sqrt(2.0 / (l.in + l.out));
    for (std::size_t i = 0; i < static_cast<std::size_t>(l.in) * static_cast<std::size_t>(l.out); ++i) {
      params_(static_cast<Eigen::Index>(l.offset + i)) = sd * init.normal();
    }
  };
  for (const auto& l : psi_) fill(l, 1.0);
  for (std::size_t i = 0; i < phi_.size(); ++i) fill(phi_[i], i + 1 == phi_.size() ? 0.1 : 1.0);

  // Start the output at the prior centre on the link scale.
  const auto& last = phi_.back();
  Vec bias(params_.data() + last.offset + static_cast<std::size_t>(last.in * last.out), last.out);
  const int d = family.dim;
  for (int i = 0; i < d; ++i) {
    const bool c = arch.links == LinkMode::Constrained;
    bias(i) = c ? std::log(prior.sigma.mid()) : prior.sigma.mid();
    bias(d + i) = prior.xi.mid();
    bias(2 * d + 1 + i) = c ? std::log(prior.rate.mid()) : prior.rate.mid();
  }
  bias(2 * d) = arch.links == LinkMode::Constrained ? 0.0 : prior.rho.mid();
}

void NeuralEstimator::set_parameters(const VectorXd& params) {
  if (params.size() != params_.size()) throw Error(ErrorCode::DimensionMismatch, "parameter vector has the wrong size");
  params_ = params;
}

std::vector<double> NeuralEstimator::apply_links(const VectorXd& z, VectorXd* dlink) const {
  const int d = family_.dim;
  std::vector<double> out(static_cast<std::size_t>(z.size()));
  if (dlink) dlink->setOnes(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) out[static_cast<std::size_t>(i)] = z(i);
  if (arch_.links == LinkMode::Identity) return out;
  auto exp_link = [&](Eigen::Index i) {
    out[static_cast<std::size_t>(i)] = std::exp(z(i));
    if (dlink) (*dlink)(i) = out[static_cast<std::size_t>(i)];
  };
  for (int i = 0; i < d; ++i) {
    exp_link(i);
    exp_link(2 * d + 1 + i);
  }
  const double t = std::tanh(z(2 * d));
  out[static_cast<std::size_t>(2 * d)] = prior_.rho.lo + prior_.rho.width() * 0.5 * (1.0 + t);
  if (dlink) (*dlink)(2 * d) = prior_.rho.width() * 0.5 * (1.0 - t * t);
  return out;
}

std::vector<double> NeuralEstimator::forward(const CountSample& data) const {
  if (static_cast<int>(data.cols()) != family_.dim) {
    throw Error(ErrorCode::DimensionMismatch, "dataset has " + std::to_string(data.cols()) +
                                                  " columns, estimator expects " + std::to_string(family_.dim));
  }
  return forward(encode(data));
}

std::vector<double> NeuralEstimator::forward(const EncodedData& data) const {
  if (data.x.rows() != family_.dim) throw Error(ErrorCode::DimensionMismatch, "encoded data width mismatch");
  MatrixXd a = data.x;
  for (const auto& l : psi_) {
    const ConstMat w(params_.data() + l.offset, l.out, l.in);
    const ConstVec b(params_.data() + l.offset + static_cast<std::size_t>(l.out * l.in), l.out);
    MatrixXd z = w * a;
    z.colwise() += b;
    apply_activation(l.activation, z);
    a = std::move(z);
  }
  MatrixXd v = a * data.w;
  for (const auto& l : phi_) {
    const ConstMat w(params_.data() + l.offset, l.out, l.in);
    const ConstVec b(params_.data() + l.offset + static_cast<std::size_t>(l.out * l.in), l.out);
    MatrixXd z = w * v;
    z.colwise() += b;
    apply_activation(l.activation, z);
    v = std::move(z);
  }
  return apply_links(v.col(0), nullptr);
}

double NeuralEstimator::loss_and_gradient(const EncodedData& data, std::span<const double> theta_true,
                                          VectorXd& grad) const {
  if (theta_true.size() != output_size()) throw Error(ErrorCode::DimensionMismatch, "theta has the wrong length");
  if (grad.size() != params_.size()) grad = VectorXd::Zero(params_.size());

  std::vector<MatrixXd> psi_out;
  psi_out.reserve(psi_.size() + 1);
  psi_out.push_back(data.x);
  for (const auto& l : psi_) {
    const ConstMat w(params_.data() + l.offset, l.out, l.in);
    const ConstVec b(params_.data() + l.offset + static_cast<std::size_t>(l.out * l.in), l.out);
    MatrixXd z = w * psi_out.back();
    z.colwise() += b;
    apply_activation(l.activation, z);
    psi_out.push_back(std::move(z));
  }
  std::vector<VectorXd> phi_out;
  phi_out.reserve(phi_.size() + 1);
  phi_out.push_back(psi_out.back() * data.w);
  for (const auto& l : phi_) {
    const ConstMat w(params_.data() + l.offset, l.out, l.in);
    const ConstVec b(params_.data() + l.offset + static_cast<std::size_t>(l.out * l.in), l.out);
    VectorXd z = w * phi_out.back() + b;
    if (l.activation == Activation::Tanh) tanh_inplace(z);
    phi_out.push_back(std::move(z));
  }
  VectorXd dlink;
  const auto theta_hat = apply_links(phi_out.back(), &dlink);
  const auto weights = loss_weights(prior_, family_.dim);

  double value = 0.0;
  VectorXd g(static_cast<Eigen::Index>(theta_hat.size()));
  for (std::size_t i = 0; i < theta_hat.size(); ++i) {
    const double diff = theta_hat[i] - theta_true[i];
    value += weights[i] * diff * diff;
    g(static_cast<Eigen::Index>(i)) = 2.0 * weights[i] * diff * dlink(static_cast<Eigen::Index>(i));
  }

  for (std::size_t k = phi_.size(); k-- > 0;) {
    const auto& l = phi_[k];
    VectorXd gz = g.cwiseProduct(activation_slope(l.activation, phi_out[k + 1]));
    Mat gw(grad.data() + l.offset, l.out, l.in);
    Vec gb(grad.data() + l.offset + static_cast<std::size_t>(l.out * l.in), l.out);
    gw.noalias() += gz * phi_out[k].transpose();
    gb += gz;
    const ConstMat w(params_.data() + l.offset, l.out, l.in);
    g = w.transpose() * gz;
  }
  MatrixXd ga = g * data.w.transpose();
  for (std::size_t k = psi_.size(); k-- > 0;) {
    const auto& l = psi_[k];
    MatrixXd gz = ga.cwiseProduct(activation_slope(l.activation, psi_out[k + 1]));
    Mat gw(grad.data() + l.offset, l.out, l.in);
    Vec gb(grad.data() + l.offset + static_cast<std::size_t>(l.out * l.in), l.out);
    gw.noalias() += gz * psi_out[k].transpose();
    gb += gz.rowwise().sum();
    if (k > 0) {
      const ConstMat w(params_.data() + l.offset, l.out, l.in);
      ga.noalias() = w.transpose() * gz;
    }
  }
  return value;
}

Json NeuralEstimator::to_json() const {
  Json layers = Json::array();
  auto dump = [&](const std::vector<LayerShape>& ls, const char* block) {
    for (const auto& l : ls) {
      const ConstMat w(params_.data() + l.offset, l.out, l.in);
      std::vector<double> row_major;
      row_major.reserve(static_cast<std::size_t>(l.out * l.in));
      for (int r = 0; r < l.out; ++r) {
        for (int c = 0; c < l.in; ++c) row_major.push_back(w(r, c));
      }
      const ConstVec b(params_.data() + l.offset + static_cast<std::size_t>(l.out * l.in), l.out);
      layers.push_back({{"block", block},
                        {"rows", l.out},
                        {"cols", l.in},
                        {"activation", std::string(activation_name(l.activation))},
                        {"weights", row_major},
                        {"bias", std::vector<double>(b.data(), b.data() + b.size())}});
    }
  };
  dump(psi_, "psi");
  dump(phi_, "phi");
  auto range = [](const Range& r) { return Json::array({r.lo, r.hi}); };
  return Json{{"format", kFormatName},
              {"version", kFormatVersion},
              {"family",
               {{"generator", family_.generator}, {"model", std::string(to_string(family_.model))}, {"dim", family_.dim}}},
              {"prior",
               {{"sigma_range", range(prior_.sigma)},
                {"xi_range", range(prior_.xi)},
                {"rho_range", range(prior_.rho)},
                {"rate_range", range(prior_.rate)}}},
              {"architecture",
               {{"psi_hidden", arch_.psi_hidden},
                {"q", arch_.q},
                {"phi_hidden", arch_.phi_hidden},
                {"activation", std::string(activation_name(arch_.activation))},
                {"links", std::string(link_name(arch_.links))}}},
              {"layers", layers}};
}

NeuralEstimator NeuralEstimator::from_json(const Json& j) {
  try {
    if (j.at("format").get<std::string>() != kFormatName) throw Error(ErrorCode::Config, "not an mdgpd-nbe file");
    if (j.at("version").get<int>() != kFormatVersion) throw Error(ErrorCode::Config, "unsupported weights version");
    NeuralEstimator e;
    const auto& fam = j.at("family");
    e.family_.generator = fam.at("generator").get<GeneratorSpec>();
    e.family_.model = discrete_model_from_string(fam.at("model").get<std::string>());
    e.family_.dim = fam.at("dim").get<int>();
    const auto& pr = j.at("prior");
    auto range = [](const Json& r) { return Range{r.at(0).get<double>(), r.at(1).get<double>()}; };
    e.prior_ = {range(pr.at("sigma_range")), range(pr.at("xi_range")), range(pr.at("rho_range")),
                range(pr.at("rate_range"))};
    validate_prior(e.prior_);
    const auto& ar = j.at("architecture");
    e.arch_.psi_hidden = ar.at("psi_hidden").get<std::vector<int>>();
    e.arch_.q = ar.at("q").get<int>();
    e.arch_.phi_hidden = ar.at("phi_hidden").get<std::vector<int>>();
    e.arch_.activation = activation_from_string(ar.at("activation").get<std::string>());
    e.arch_.links = link_mode_from_string(ar.at("links").get<std::string>());
    std::size_t offset = 0;
    e.psi_ = chain(e.family_.dim, e.arch_.psi_hidden, e.arch_.q, e.arch_.activation, e.arch_.activation, offset);
    e.phi_ = chain(e.arch_.q, e.arch_.phi_hidden, static_cast<int>(e.output_size()), e.arch_.activation,
                   Activation::Identity, offset);
    e.params_ = VectorXd::Zero(static_cast<Eigen::Index>(offset));
    const auto& layers = j.at("layers");
    if (layers.size() != e.psi_.size() + e.phi_.size()) throw Error(ErrorCode::Config, "layer count mismatch");
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const auto& l = i < e.psi_.size() ? e.psi_[i] : e.phi_[i - e.psi_.size()];
      const auto& lj = layers[i];
      const auto w = lj.at("weights").get<std::vector<double>>();
      const auto b = lj.at("bias").get<std::vector<double>>();
      if (lj.at("rows").get<int>() != l.out || lj.at("cols").get<int>() != l.in ||
          w.size() != static_cast<std::size_t>(l.out * l.in) || b.size() != static_cast<std::size_t>(l.out) ||
          activation_from_string(lj.at("activation").get<std::string>()) != l.activation) {
        throw Error(ErrorCode::Config, "layer " + std::to_string(i) + " shape mismatch");
      }
      Mat wm(e.params_.data() + l.offset, l.out, l.in);
      for (int r = 0; r < l.out; ++r) {
        for (int c = 0; c < l.in; ++c) wm(r, c) = w[static_cast<std::size_t>(r * l.in + c)];
      }
      std::copy(b.begin(), b.end(), e.params_.data() + l.offset + static_cast<std::size_t>(l.out * l.in));
    }
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::Config, std::string("malformed estimator file: ") + ex.what());
  }
}

void NeuralEstimator::save(const std::filesystem::path& path) const { write_json_file(path, to_json()); }

NeuralEstimator NeuralEstimator::load(const std::filesystem::path& path) { return from_json(read_json_file(path)); }

// ---------------------------------------------------------------------------
// Training and inference

double loss(std::span<const double> theta_true, std::span<const double> theta_hat, const Prior& prior, int dim) {
  if (theta_true.size() != theta_hat.size() || theta_true.size() != param_count(dim)) {
    throw Error(ErrorCode::DimensionMismatch, "loss arguments have different lengths");
  }
  const auto w = loss_weights(prior, dim);
  double s = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double diff = theta_true[i] - theta_hat[i];
    s += w[i] * diff * diff;
  }
  return s;
}

TrainResult train(const Family& family, const Prior& prior, const TrainingConfig& config, const Architecture& arch) {
  validate_config(config);
  validate_prior(prior);
  const auto t0 = std::chrono::steady_clock::now();
  const RandomStream root(config.seed, "nbe-train");
  auto init = root.split("init");
  TrainResult result{NeuralEstimator(family, prior, arch, init), {}, 0.0, 0.0, 0.0};
  auto& est = result.estimator;

  std::vector<EncodedData> inputs;
  std::vector<std::vector<double>> targets;
  auto simulate = [&](std::size_t round, std::size_t k, std::vector<EncodedData>& xs,
                      std::vector<std::vector<double>>& ys, const char* tag) {
    auto ps = root.split(std::string(tag) + "-prior", round);
    auto ds = root.split(std::string(tag) + "-data", round);
    const auto items = simulate_training_batch(sample_prior(prior, family, ps, k), family, config, ds);
    xs.clear();
    ys.clear();
    for (const auto& it : items) {
      xs.push_back(encode(it.data));
      ys.push_back(to_vector(it.theta));
    }
  };

  const auto n_params = static_cast<Eigen::Index>(est.parameter_count());
  VectorXd m1 = VectorXd::Zero(n_params), m2 = VectorXd::Zero(n_params), grad(n_params), batch_grad(n_params);
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8, clip = 5.0;
  std::size_t step = 0;
  std::vector<std::size_t> order;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    if (epoch == 0 || (config.refresh_every > 0 && epoch % config.refresh_every == 0)) {
      simulate(epoch, config.k, inputs, targets, "train");
    }
    order.resize(inputs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto shuffle = root.split("shuffle", epoch);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.index(i)]);

    // Cosine decay to 5% of the initial step.
    const double progress = config.epochs > 1 ? static_cast<double>(epoch) / static_cast<double>(config.epochs - 1) : 0.0;
    const double lr = config.step_size * (0.05 + 0.95 * 0.5 * (1.0 + std::cos(std::numbers::pi * progress)));

    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      batch_grad.setZero();
      for (std::size_t i = start; i < stop; ++i) {
        grad.setZero();
        epoch_loss += est.loss_and_gradient(inputs[order[i]], targets[order[i]], grad);
        batch_grad += grad;
      }
      batch_grad /= static_cast<double>(stop - start);
      const double norm = batch_grad.norm();
      if (!std::isfinite(norm)) {
        throw Error(ErrorCode::NonFiniteLoss, "non-finite gradient in epoch " + std::to_string(epoch));
      }
      if (norm > clip) batch_grad *= clip / norm;
      ++step;
      m1 = beta1 * m1 + (1.0 - beta1) * batch_grad;
      m2 = beta2 * m2 + (1.0 - beta2) * batch_grad.cwiseProduct(batch_grad);
      const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
      VectorXd p = est.parameters();
      p.array() -= lr * (m1.array() / c1) / ((m2.array() / c2).sqrt() + eps);
      est.set_parameters(p);
    }
    epoch_loss /= static_cast<double>(order.size());
    if (!std::isfinite(epoch_loss)) {
      throw Error(ErrorCode::NonFiniteLoss, "non-finite loss in epoch " + std::to_string(epoch));
    }
    result.epoch_loss.push_back(epoch_loss);
  }

  if (config.holdout > 0) {
    std::vector<EncodedData> hx;
    std::vector<std::vector<double>> hy;
    simulate(0, config.holdout, hx, hy, "holdout");
    const int d = family.dim;
    std::vector<double> centre(param_count(d));
    for (int i = 0; i < d; ++i) {
      centre[static_cast<std::size_t>(i)] = prior.sigma.mid();
      centre[static_cast<std::size_t>(d + i)] = prior.xi.mid();
      centre[static_cast<std::size_t>(2 * d + 1 + i)] = prior.rate.mid();
    }
    centre[static_cast<std::size_t>(2 * d)] = prior.rho.mid();
    for (std::size_t i = 0; i < hx.size(); ++i) {
      result.holdout_risk += loss(hy[i], est.forward(hx[i]), prior, d);
      result.prior_mean_risk += loss(hy[i], centre, prior, d);
    }
    result.holdout_risk /= static_cast<double>(hx.size());
    result.prior_mean_risk /= static_cast<double>(hx.size());
  }
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

double gradient_check(const NeuralEstimator& estimator, const CountSample& data, std::span<const double> theta_true,
                      double h) {
  const auto enc = encode(data);
  VectorXd analytic = VectorXd::Zero(static_cast<Eigen::Index>(estimator.parameter_count()));
  estimator.loss_and_gradient(enc, theta_true, analytic);
  NeuralEstimator probe = estimator;
  VectorXd p = estimator.parameters();
  auto loss_at = [&](const VectorXd& params) {
    probe.set_parameters(params);
    return loss(theta_true, probe.forward(enc), estimator.prior(), estimator.dim());
  };
  double worst = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double saved = p(i);
    p(i) = saved + h;
    const double up = loss_at(p);
    p(i) = saved - h;
    const double down = loss_at(p);
    p(i) = saved;
    const double fd = (up - down) / (2.0 * h);
    if (!std::isfinite(fd) || !std::isfinite(analytic(i))) return std::numeric_limits<double>::infinity();
    const double denom = std::max({std::abs(analytic(i)), std::abs(fd), 1e-6});
    worst = std::max(worst, std::abs(analytic(i) - fd) / denom);
  }
  return worst;
}

ModelParams estimate(const NeuralEstimator& estimator, const CountSample& data) {
  return from_vector(estimator.forward(data), estimator.dim());
}

double percentile(std::vector<double> values, double level) {
  if (values.empty()) throw Error(ErrorCode::EmptyInput, "percentile of no values");
  std::sort(values.begin(), values.end());
  return param_percentile_sorted(values, level);
}

EstimateReport parametric_bootstrap(const NeuralEstimator& estimator, const ModelParams& theta_hat, std::size_t m,
                                    RandomStream& stream, std::size_t b) {
  std::vector<RandomStream> streams;
  streams.reserve(b);
  for (std::size_t i = 0; i < b; ++i) streams.push_back(stream.split("bootstrap", i));
  return parametric_bootstrap(estimator, theta_hat, m, std::move(streams));
}

EstimateReport parametric_bootstrap(const NeuralEstimator& estimator, const ModelParams& theta_hat, std::size_t m,
                                    std::vector<RandomStream> streams) {
  if (streams.size() < 2) throw Error(ErrorCode::InvalidArgument, "bootstrap needs B >= 2");
  require_valid(theta_hat);
  const auto centre = to_vector(theta_hat);
  const std::size_t p = centre.size();
  std::vector<std::vector<double>> draws(p);
  for (auto& s : streams) {
    const auto data = simulate_dataset(estimator.family(), theta_hat, s, m);
    const auto est = estimator.forward(data);
    for (std::size_t i = 0; i < p; ++i) draws[i].push_back(est[i]);
  }
  EstimateReport r;
  r.theta_hat = theta_hat;
  r.n_bootstrap = streams.size();
  for (std::size_t i = 0; i < p; ++i) {
    auto v = draws[i];
    std::sort(v.begin(), v.end());
    r.ci_lower.push_back(param_percentile_sorted(v, 0.025));
    r.ci_upper.push_back(param_percentile_sorted(v, 0.975));
    double ss = 0.0;
    for (double x : v) ss += (x - centre[i]) * (x - centre[i]);
    r.rmse.push_back(std::sqrt(ss / static_cast<double>(v.size())));
  }
  return r;
}

Prior prior_from_json(const Json& j, Prior base) {
  auto overlay = [&](const char* key, Range& r) {
    if (!j.contains(key)) return;
    const auto& v = j.at(key);
    if (!v.is_array() || v.size() != 2) throw Error(ErrorCode::Config, std::string(key) + " must be [lo, hi]");
    r = {v.at(0).get<double>(), v.at(1).get<double>()};
  };
  overlay("sigma_range", base.sigma);
  overlay("xi_range", base.xi);
  overlay("rho_range", base.rho);
  overlay("rate_range", base.rate);
  validate_prior(base);
  return base;
}

TrainingConfig training_config_from_json(const Json& j, TrainingConfig base) {
  try {
    base.k = j.value("k", base.k);
    base.j = j.value("j", base.j);
    base.m = j.value("m", base.m);
    base.epochs = j.value("epochs", base.epochs);
    base.step_size = j.value("step_size", base.step_size);
    base.batch_size = j.value("batch_size", base.batch_size);
    base.seed = j.value("seed", base.seed);
    base.refresh_every = j.value("refresh_every", base.refresh_every);
    base.holdout = j.value("holdout", base.holdout);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Config, std::string("training config: ") + e.what());
  }
  validate_config(base);
  return base;
}

Json to_json(const TrainingConfig& c) {
  return Json{{"k", c.k},
              {"j", c.j},
              {"m", c.m},
              {"epochs", c.epochs},
              {"step_size", c.step_size},
              {"batch_size", c.batch_size},
              {"seed", c.seed},
              {"refresh_every", c.refresh_every},
              {"holdout", c.holdout}};
}

void write_estimates_csv(const std::filesystem::path& path, const EstimateReport& report) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << "param,estimate,ci_lo,ci_hi,rmse\n";
  const auto names = param_names(report.theta_hat.dim);
  const auto est = to_vector(report.theta_hat);
  for (std::size_t i = 0; i < names.size(); ++i) {
    out << names[i] << ',' << format_double(est[i]) << ',' << format_double(report.ci_lower[i]) << ','
        << format_double(report.ci_upper[i]) << ',' << format_double(report.rmse[i]) << '\n';
  }
}

}  // namespace mdgpd::nbe
