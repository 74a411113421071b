#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>
#include <unistd.h>

#include "cli.hpp"
#include "covert_isac/csv.hpp"

using namespace cisac;
using namespace cisac::cli;
namespace fs = std::filesystem;

namespace {

int run_args(std::vector<std::string> args) {
  args.insert(args.begin(), "covert_isac");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return run(static_cast<int>(argv.size()), argv.data());
}

fs::path scratch_dir(const std::string& name) {
  fs::path d = fs::temp_directory_path() / ("cisac_cli_" + std::to_string(::getpid())) / name;
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

}  // namespace

TEST_CASE("sweep points and parameter names") {
  SweepSpec s;
  s.from = 1.0;
  s.to = 2.0;
  s.steps = 5;
  auto x = sweep_points(s);
  REQUIRE(x.size() == 5);
  CHECK(x.front() == 1.0);
  CHECK(x.back() == 2.0);
  CHECK(x[2] == doctest::Approx(1.5).epsilon(1e-15));

  s.steps = 1;
  CHECK_THROWS_AS(sweep_points(s), ConfigError);
  s.steps = 3;
  s.to = 1.0;
  CHECK_THROWS_AS(sweep_points(s), ConfigError);

  for (SweepParam p : {SweepParam::PbMax, SweepParam::PaMax, SweepParam::Rmin, SweepParam::MaxObjective})
    CHECK(parse_sweep_param(to_string(p)) == p);
  CHECK_THROWS(parse_sweep_param("P_t"));
}

TEST_CASE("per-point settings") {
  SystemConfig base;
  SweepSpec s;
  s.parameter = SweepParam::PaMax;
  PointSetup p = point_setup(base, s, 6.0);
  CHECK(p.cfg.P_A_max == 6.0);
  CHECK(p.cfg.P_A == 5.0);
  CHECK(p.P_b_max == doctest::Approx(base.P_t - 6.0));

  s.pt_sevenths = true;
  p = point_setup(base, s, 3.5);
  CHECK(p.cfg.P_A_max == doctest::Approx(3.5 * base.P_t / 7.0));
  CHECK(p.cfg.P_A == doctest::Approx(p.cfg.P_A_max - 1.0));
  CHECK(p.P_b_max == doctest::Approx(base.P_t - p.cfg.P_A_max));

  s = SweepSpec{};
  s.parameter = SweepParam::Rmin;
  CHECK(point_setup(base, s, 3.0).cfg.R_min == 3.0);
  s.parameter = SweepParam::MaxObjective;
  CHECK(point_setup(base, s, 12.0).L_max == 12.0);
  s.parameter = SweepParam::PbMax;
  CHECK(point_setup(base, s, 4.0).P_b_max == 4.0);
}

TEST_CASE("dep tolerance") {
  CHECK(dep_tolerance(1000000) == 0.005);
  CHECK(dep_tolerance(4000000) == 0.005);
  CHECK(dep_tolerance(10000) == doctest::Approx(0.05));
}

TEST_CASE("validate-dep rows") {
  SystemConfig cfg;
  ChannelSet ch = generate_channels(cfg);
  const double tol = dep_tolerance(200000);

  SUBCASE("statistical defaults pass") {
    auto rows = validate_dep(cfg, WcsiMode::Statistical, reference_design(cfg, ch), 200000, 7);
    REQUIRE(rows.size() == 7);
    for (const DepRow& r : rows) {
      INFO(r.quantity);
      CHECK(r.abs_err <= tol);
    }
    CHECK(dep_csv(rows).rfind("mode,quantity,closed_form,monte_carlo,half_width,abs_err\n", 0) == 0);
  }
  SUBCASE("instantaneous at the covert power limit") {
    const double D = cfg.P_A_max - cfg.P_A_min;
    CovariancePair p;
    p.T = CMat::Identity(cfg.N, cfg.N) * (cfg.P_A / cfg.N);
    p.W1 = CMat::Identity(cfg.N, cfg.N) * (cfg.epsilon * D / cfg.N);
    auto rows = validate_dep(cfg, WcsiMode::Instantaneous, p, 200000, 7);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].quantity == "xi_bar2_star");
    CHECK(rows[0].closed_form == doctest::Approx(1.0 - cfg.epsilon).epsilon(1e-12));
    for (const DepRow& r : rows) CHECK(r.abs_err <= tol);
  }
  SUBCASE("bounded silent design") {
    CovariancePair p = reference_design(cfg, ch);
    p.W1.setZero();
    auto rows = validate_dep(cfg, WcsiMode::Bounded, p, 200000, 7);
    for (const DepRow& r : rows) {
      INFO(r.quantity);
      CHECK(r.abs_err <= tol);
      if (r.quantity == "xi_star") CHECK(r.closed_form == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("sweep order, schema and determinism") {
  SystemConfig cfg;
  SweepSpec s;
  s.parameter = SweepParam::Rmin;
  s.from = 2.0;
  s.to = 10.0;
  s.steps = 3;
  SweepOptions opt;
  opt.mode = WcsiMode::Statistical;
  opt.seeds = 2;
  opt.threads = 2;
  auto rows = run_sweep(cfg, s, opt);
  REQUIRE(rows.size() == 6);
  for (size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].param == sweep_points(s)[i / 2]);
    CHECK(rows[i].seed == cfg.seed + i % 2);
    CHECK(rows[i].status == "success");
    CHECK(rows[i].covert_rate >= rows[i].param - 1e-4);
  }
  // Tightening the rate floor can only cost sensing quality.
  for (size_t i = 2; i < rows.size(); ++i) CHECK(rows[i].objective >= rows[i - 2].objective - 1e-5);

  std::string csv = sweep_csv(rows);
  CHECK(csv.rfind("param,seed,mode,benchmark,covert_rate,objective,status\n", 0) == 0);
  opt.threads = 1;
  CHECK(sweep_csv(run_sweep(cfg, s, opt)) == csv);
}

TEST_CASE("exit codes") {
  CHECK(run_args({}) == kUsage);
  CHECK(run_args({"solve", "--mode", "psychic"}) == kUsage);
  CHECK(run_args({"sweep", "--from", "1", "--to", "2", "--steps", "1"}) == kUsage);
  CHECK(run_args({"sweep", "--param", "R_min", "--from", "1", "--to", "2", "--steps", "2", "--pt-sevenths"}) ==
        kUsage);
  CHECK(run_args({"validate-dep", "--samples", "100"}) == kUsage);
  CHECK(run_args({"solve", "/nonexistent/config.json"}) == kUsage);
  CHECK(run_args({"validate-dep", "--mode", "gaussian", "--samples", "20000"}) == kOk);

  fs::path dir = scratch_dir("infeasible");
  SystemConfig cfg;
  cfg.R_min = 60.0;
  std::ofstream(dir / "cfg.json") << config_to_json(cfg);
  CHECK(run_args({"solve", (dir / "cfg.json").string(), "--out", dir.string()}) == kInfeasible);
  auto j = nlohmann::json::parse(slurp(dir / "solution.json"));
  CHECK(j["status"] == "infeasible");
  CHECK(j["infeasibility"]["binding"] == "rate");
  CHECK_FALSE(fs::exists(dir / "beampattern.csv"));
}

TEST_CASE("solve and beampattern files") {
  fs::path dir = scratch_dir("sensing_only");
  REQUIRE(run_args({"solve", "--benchmark", "sensing-only", "--out", dir.string()}) == kOk);
  auto j = nlohmann::json::parse(slurp(dir / "solution.json"));
  CHECK(j["benchmark"] == "sensing-only");
  CHECK_FALSE(j.contains("covert_margin"));

  fs::path dfan = scratch_dir("dfan");
  REQUIRE(run_args({"solve", "--mode", "statistical", "--out", dfan.string()}) == kOk);
  j = nlohmann::json::parse(slurp(dfan / "solution.json"));
  CHECK(j.contains("covert_margin"));
  CHECK(j["rank_ratio"].get<double>() <= 1e-3);

  fs::path a = dfan / "a.csv", b = dfan / "b.csv";
  REQUIRE(run_args({"beampattern", (dfan / "solution.json").string(), "--out", a.string()}) == kOk);
  REQUIRE(run_args({"beampattern", (dfan / "solution.json").string(), "--out", b.string()}) == kOk);
  CHECK(slurp(a) == slurp(b));
  CHECK(slurp(a) == slurp(dfan / "beampattern.csv"));

  auto rows = csv_rows(slurp(a));
  REQUIRE(rows.size() == 181);
  CHECK(rows[0] == std::vector<std::string>{"theta_deg", "desired", "gain_total", "gain_info", "gain_dfan"});
  for (size_t i = 1; i < rows.size(); ++i) {
    double tot = std::stod(rows[i][2]), info = std::stod(rows[i][3]), an = std::stod(rows[i][4]);
    CHECK(tot == doctest::Approx(info + an).epsilon(1e-14));
  }
}

TEST_CASE("zero design has a zero beampattern") {
  SystemConfig cfg;
  CovariancePair p{CMat::Zero(cfg.N, cfg.N), CMat::Zero(cfg.N, cfg.N), 0.0};
  auto rows = csv_rows(beampattern_csv(p, make_grid(cfg)));
  for (size_t i = 1; i < rows.size(); ++i)
    for (int c = 2; c < 5; ++c) CHECK(std::stod(rows[i][c]) == 0.0);
}
