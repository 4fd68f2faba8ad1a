#include "mdgpd/io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace mdgpd {

namespace {

template <typename T>
T field(const Json& j, const char* name) {
  if (!j.contains(name)) throw Error(ErrorCode::Config, std::string("missing field '") + name + "'");
  try {
    return j.at(name).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Config, std::string("field '") + name + "': " + e.what());
  }
}

}  // namespace

void to_json(Json& j, const ModelParams& p) {
  j = Json{{"sigma", p.sigma}, {"xi", p.xi}, {"rho", p.rho}, {"gen_params", p.gen_params}, {"dim", p.dim}};
}

void from_json(const Json& j, ModelParams& p) {
  p.sigma = field<std::vector<double>>(j, "sigma");
  p.xi = field<std::vector<double>>(j, "xi");
  p.rho = j.value("rho", 0.0);
  p.gen_params = j.value("gen_params", std::vector<double>{});
  p.dim = j.value("dim", static_cast<int>(p.sigma.size()));
  require_valid(p);
}

void to_json(Json& j, const DeltaPmf& d) {
  j = Json{{"support", std::vector<std::int64_t>(d.support().begin(), d.support().end())},
           {"probs", std::vector<double>(d.probs().begin(), d.probs().end())}};
}

DeltaPmf delta_pmf_from_json(const Json& j) {
  return DeltaPmf(field<std::vector<std::int64_t>>(j, "support"), field<std::vector<double>>(j, "probs"));
}

void to_json(Json& j, const GeneratorSpec& s) {
  j = Json{{"kind", std::string(to_string(s.kind))},
           {"rates", s.rates},
           {"shifts", s.shifts},
           {"target_corr", s.target_corr}};
  if (s.delta_pmf) j["delta_pmf"] = *s.delta_pmf;
}

void from_json(const Json& j, GeneratorSpec& s) {
  s = GeneratorSpec{};
  s.kind = generator_kind_from_string(field<std::string>(j, "kind"));
  s.rates = j.value("rates", std::vector<double>{});
  s.shifts = j.value("shifts", std::vector<std::int64_t>{});
  s.target_corr = j.value("target_corr", 0.0);
  if (j.contains("delta_pmf")) s.delta_pmf = delta_pmf_from_json(j.at("delta_pmf"));
  validate_spec(s);
}

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::Config, path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

void write_count_csv(const std::filesystem::path& path, const CountSample& sample,
                     const std::vector<std::string>& header) {
  if (!sample.empty() && header.size() != sample.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "CSV header width does not match sample");
  }
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n';
  for (std::size_t r = 0; r < sample.rows(); ++r) {
    for (std::size_t c = 0; c < sample.cols(); ++c) out << (c ? "," : "") << sample(r, c);
    out << '\n';
  }
}

CountSample read_count_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::Config, path.string() + ": missing header");
  const auto cols = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
  std::vector<std::int64_t> values;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t n = 0;
    while (std::getline(ss, cell, ',')) {
      std::int64_t v = 0;
      const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (res.ec != std::errc{} || res.ptr != cell.data() + cell.size()) {
        throw Error(ErrorCode::Config, path.string() + ":" + std::to_string(line_no) + ": not an integer '" + cell + "'");
      }
      values.push_back(v);
      ++n;
    }
    if (n != cols) {
      throw Error(ErrorCode::DimensionMismatch,
                  path.string() + ":" + std::to_string(line_no) + ": expected " + std::to_string(cols) + " fields");
    }
  }
  return CountSample(cols, std::move(values));
}

std::string format_double(double x) {
  // Shortest representation that round-trips.
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

}  // namespace mdgpd
