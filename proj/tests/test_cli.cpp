// Runs the mdgpd binary end to end.
#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mdgpd/dryspells.hpp"

namespace fs = std::filesystem;
using namespace mdgpd;

namespace {

const fs::path kRoot = fs::temp_directory_path() / "mdgpd_test_cli";

struct Run {
  int status = -1;
  std::string err;
};

Run run(const std::string& args) {
  fs::create_directories(kRoot);
  const auto err_path = kRoot / "stderr.txt";
  const std::string cmd = std::string(MDGPD_CLI) + " " + args + " > /dev/null 2> " + err_path.string();
  const int raw = std::system(cmd.c_str());
  Run r;
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  std::ifstream in(err_path);
  std::ostringstream s;
  s << in.rdbuf();
  r.err = s.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> lines_of(const fs::path& p) {
  std::vector<std::string> out;
  std::ifstream in(p);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

fs::path write_file(const std::string& name, const std::string& text) {
  fs::create_directories(kRoot);
  const auto p = kRoot / name;
  std::ofstream(p) << text;
  return p;
}

const char* kTinyTraining = R"("training": {"k": 64, "epochs": 2, "holdout": 16})";

}  // namespace

TEST_CASE("simulate is deterministic per seed", "[cli]") {
  const auto dir = kRoot / "simulate";
  fs::remove_all(dir);
  REQUIRE(run("--out " + dir.string() + " --seed 3 simulate --n 200 --output " + (dir / "a.csv").string()).status == 0);
  // Global options may follow the subcommand.
  REQUIRE(run("simulate --n 200 --seed 3 --out " + dir.string() + " --output " + (dir / "b.csv").string()).status == 0);
  REQUIRE(run("--out " + dir.string() + " --seed 4 simulate --n 200 --output " + (dir / "c.csv").string()).status == 0);
  CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));
  CHECK(slurp(dir / "a.csv") != slurp(dir / "c.csv"));
  const auto rows = lines_of(dir / "a.csv");
  CHECK(rows.size() == 201);
  CHECK(rows.front() == "n1,n2");
}

TEST_CASE("simulate shapes", "[cli]") {
  const auto dir = kRoot / "shapes";
  fs::remove_all(dir);
  REQUIRE(run("--out " + dir.string() + " simulate --n 0").status == 0);
  CHECK(slurp(dir / "simulate.csv") == "n1,n2\n");
  REQUIRE(run("--out " + dir.string() + " simulate --n 50 --d 3").status == 0);
  const auto rows = lines_of(dir / "simulate.csv");
  CHECK(rows.size() == 51);
  CHECK(rows.front() == "n1,n2,n3");
  // The standard model has max(N) >= 1 in every row.
  for (std::size_t i = 1; i < rows.size(); ++i) {
    std::stringstream s(rows[i]);
    std::int64_t best = -1000;
    for (std::string cell; std::getline(s, cell, ',');) best = std::max<std::int64_t>(best, std::stoll(cell));
    CHECK(best >= 1);
  }
  const auto cfg = write_file("nonstandard.json", R"({"params": {"sigma": [1.5, 1.5], "xi": [0.2, 0.2], "rho": 0,
    "gen_params": [1, 1]}, "n": 30})");
  REQUIRE(run("--out " + dir.string() + " --config " + cfg.string() + " simulate").status == 0);
  const auto ns = lines_of(dir / "simulate.csv");
  CHECK(ns.size() == 31);
  // Margins may go negative, but the largest coordinate stays positive.
  for (std::size_t i = 1; i < ns.size(); ++i) {
    const auto comma = ns[i].find(',');
    CHECK(std::max(std::stoll(ns[i].substr(0, comma)), std::stoll(ns[i].substr(comma + 1))) >= 1);
  }
}

TEST_CASE("eval cdf with Delta fixed at zero", "[cli]") {
  // T1 = T2 makes both coordinates equal to G = ceil(E), so
  // P(N1 <= 1, N2 <= 1) = P(E <= 1).
  const auto dir = kRoot / "eval";
  fs::remove_all(dir);
  const auto cfg = write_file("delta0.json",
                              R"({"generator": {"kind": "empirical_delta", "delta_pmf": {"support": [0], "probs": [1]}},
                                  "k1": [0, 3], "k2": [0, 3]})");
  REQUIRE(run("--out " + dir.string() + " --config " + cfg.string() + " eval --table cdf").status == 0);
  const auto rows = lines_of(dir / "eval_cdf.csv");
  REQUIRE(rows.size() == 17);
  CHECK(rows.front() == "k1,k2,value");
  bool found = false;
  for (const auto& row : rows) {
    if (row.rfind("1,1,", 0) == 0) {
      found = true;
      CHECK(std::abs(std::stod(row.substr(4)) - (1.0 - std::exp(-1.0))) < 1e-12);
    }
  }
  CHECK(found);
  REQUIRE(run("--out " + dir.string() + " --config " + cfg.string() + " eval --table pmf").status == 0);
  double total = 0.0;
  const auto pmf = lines_of(dir / "eval_pmf.csv");
  for (std::size_t i = 1; i < pmf.size(); ++i) total += std::stod(pmf[i].substr(pmf[i].rfind(',') + 1));
  CHECK(total == Catch::Approx(1.0 - std::exp(-3.0)).margin(1e-12));
}

TEST_CASE("fit trains once and then reuses the estimator", "[cli]") {
  const auto dir = kRoot / "fit";
  fs::remove_all(dir);
  REQUIRE(run("--out " + dir.string() + " --seed 2 simulate --n 150 --model standard").status == 0);
  const auto cfg = write_file("fit.json", std::string("{") + kTinyTraining + "}");
  const std::string args = "--out " + dir.string() + " --config " + cfg.string() + " fit --bootstrap 10 --data " +
                           (dir / "simulate.csv").string();
  const auto first = run(args);
  REQUIRE(first.status == 0);
  CHECK(first.err.find("training estimator") != std::string::npos);
  CHECK(fs::exists(dir / "estimator.json"));
  const auto estimates = slurp(dir / "estimates.csv");
  const auto second = run(args);
  REQUIRE(second.status == 0);
  CHECK(second.err.find("reusing saved estimator") != std::string::npos);
  CHECK(second.err.find("no training step") != std::string::npos);
  CHECK(slurp(dir / "estimates.csv") == estimates);
  const auto rows = lines_of(dir / "estimates.csv");
  REQUIRE(rows.size() == 8);
  CHECK(rows.front() == "param,estimate,ci_lo,ci_hi,rmse");
}

TEST_CASE("dryspells on a synthetic two-station file", "[cli]") {
  const auto dir = kRoot / "dry";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const nbe::Family fam{type_b_generator(1.0, 0.9), DiscreteModel::Mdgpd, 2};
  const ModelParams theta{{2.0, 2.0}, {-0.1, -0.1}, 0.9, {1.0, 1.0}, 2};
  auto rs = split_stream(13, "cli-dry");
  dry::write_precip_csv(dir / "precip.csv", dry::synthetic_stations(fam, theta, 60, 8, 8, rs));
  const auto cfg = write_file("dry.json", std::string("{") + kTinyTraining + R"(, "bootstrap": 10})");
  const auto r = run("--out " + dir.string() + " --config " + cfg.string() + " dryspells --input " +
                     (dir / "precip.csv").string() + " --estimator " + (dir / "est.json").string());
  INFO(r.err);
  REQUIRE(r.status == 0);
  for (const char* f : {"spells.csv", "pairs.csv", "delta.csv", "estimates.csv", "qq.csv"}) CHECK(fs::exists(dir / f));
  CHECK(fs::exists(dir / "est.json"));
  const auto est = lines_of(dir / "estimates.csv");
  CHECK(est.size() == 8);
  CHECK(lines_of(dir / "pairs.csv").size() == 61);
  CHECK(lines_of(dir / "pairs.csv").front() == "n1,n2");
}

TEST_CASE("study writes the comparison table", "[cli]") {
  const auto dir = kRoot / "study";
  fs::remove_all(dir);
  const auto cfg = write_file("study.json", std::string("{") + kTinyTraining + "}");
  const auto r = run("--out " + dir.string() + " --config " + cfg.string() + " study --n 200 --reps 2");
  INFO(r.err);
  REQUIRE(r.status == 0);
  const auto rows = lines_of(dir / "study.csv");
  CHECK(rows.size() == 1 + 3 * 7);
  CHECK(lines_of(dir / "study_reps.csv").size() == 1 + 3 * 2);
  CHECK(fs::exists(dir / "estimators" / "type_c_discretized_mgpd.json"));
}

TEST_CASE("exit codes", "[cli]") {
  const auto dir = kRoot / "errors";
  CHECK(run("--out " + dir.string() + " --config " + (kRoot / "absent.json").string() + " simulate").status == 3);
  const auto bad_n = write_file("bad_n.json", R"({"n": "many"})");
  CHECK(run("--out " + dir.string() + " --config " + bad_n.string() + " simulate").status == 2);
  const auto broken = write_file("broken.json", "{\"n\": ");
  CHECK(run("--out " + dir.string() + " --config " + broken.string() + " simulate").status == 2);
  const auto r = run("--out " + dir.string() + " simulate --model lognormal");
  CHECK(r.status == 2);
  CHECK(r.err.find("mdgpd: error:") != std::string::npos);
  CHECK(run("--out " + dir.string() + " fit --data " + (kRoot / "absent.csv").string()).status == 3);
  CHECK(run("--out " + dir.string() + " selftest --help").status == 0);
  CHECK(run("no-such-command").status != 0);
}
