#include <cmath>
#include <map>
#include <random>

#include "covert_isac/detection.hpp"
#include "covert_isac/optimizer.hpp"
#include "doctest.h"

using namespace cisac;

namespace {

struct Scenario {
  SystemConfig cfg;
  ChannelSet ch;
  SteeringGrid grid;
  explicit Scenario(SystemConfig c = {}) : cfg(c), ch(generate_channels(cfg)), grid(make_grid(cfg)) {}
};

CVec random_vec(std::mt19937_64& g, int N) {
  std::normal_distribution<double> nd;
  CVec v(N);
  for (int i = 0; i < N; ++i) v(i) = cd(nd(g), nd(g));
  return v;
}

// Sensing objective by direct summation over the grid and target pairs.
double brute_objective(const SystemConfig& cfg, const CMat& R, double eta) {
  double mse = 0.0;
  for (int s = 1; s <= cfg.S; ++s) {
    double deg = -90.0 + (s - 0.5) * 180.0 / cfg.S;
    bool in = false;
    for (double t : cfg.target_angles_deg) in = in || std::abs(deg - t) <= cfg.delta_theta_deg / 2;
    CVec a = steering_vector(deg2rad(deg), cfg.N, cfg.spacing_ratio);
    double r = eta * (in ? 1.0 : 0.0) - (a.adjoint() * R * a)(0, 0).real();
    mse += r * r / cfg.S;
  }
  int M = cfg.M();
  double cc = 0.0;
  for (int p = 0; p < M; ++p)
    for (int q = p + 1; q < M; ++q) {
      CVec ap = steering_vector(deg2rad(cfg.target_angles_deg[p]), cfg.N, cfg.spacing_ratio);
      CVec aq = steering_vector(deg2rad(cfg.target_angles_deg[q]), cfg.N, cfg.spacing_ratio);
      cc += std::norm((ap.adjoint() * R * aq)(0, 0));
    }
  return mse + cfg.w_c * 2.0 * cc / (M * M - M);
}

std::vector<std::string> tags(const BuiltProgram& bp) {
  std::vector<std::string> out;
  for (auto& c : bp.built.constraints) out.push_back(c.tag);
  return out;
}

bool is_covert_tag(const std::string& t) {
  return t.rfind("covert", 0) == 0 || t.rfind("bti", 0) == 0 || t == "lambda1";
}

const ConstraintInfo& find(const BuiltProgram& bp, const std::string& tag) {
  for (auto& c : bp.built.constraints)
    if (c.tag == tag) return c;
  throw std::runtime_error("no row " + tag);
}

}  // namespace

TEST_CASE("rank-one extraction") {
  CMat E = CMat::Zero(3, 3);
  E(0, 0) = 4.0;
  CVec w = rank_one_extract(E);
  CHECK((w - 2.0 * CVec::Unit(3, 0)).norm() < 1e-14);

  CVec t = rank_one_extract(CMat::Identity(2, 2));
  CHECK((t - CVec::Unit(2, 0)).norm() < 1e-14);
  CHECK(rank_one_extract(CMat::Zero(4, 4)).norm() == 0.0);
  CHECK(rank_ratio(CMat::Zero(4, 4)) == 0.0);
  CHECK(rank_ratio(CMat::Identity(3, 3)) == doctest::Approx(1.0));

  std::mt19937_64 g(10);
  for (int trial = 0; trial < 50; ++trial) {
    CVec u = random_vec(g, 10);
    CMat W = u * u.adjoint();
    CVec x = rank_one_extract(W);
    CHECK((x * x.adjoint() - W).norm() <= 1e-8 * std::max(1.0, W.norm()));
    CHECK(rank_ratio(W) < 1e-12);
    // Largest-magnitude entry is real and nonnegative; global phase is irrelevant.
    Eigen::Index k;
    x.cwiseAbs().maxCoeff(&k);
    CHECK(x(k).imag() == 0.0);
    CHECK(x(k).real() >= 0.0);
    CVec y = rank_one_extract((std::polar(1.0, 0.7) * u) * (std::polar(1.0, 0.7) * u).adjoint());
    CHECK((x - y).norm() <= 1e-10 * x.norm());
  }
}

TEST_CASE("program structure") {
  Scenario s;
  std::map<WcsiMode, BuiltProgram> bps;
  for (WcsiMode m : {WcsiMode::Bounded, WcsiMode::Gaussian, WcsiMode::Statistical, WcsiMode::Instantaneous}) {
    ProgramRequest rq;
    rq.mode = m;
    rq.w_l = CVec::Unit(s.cfg.N, 0);
    rq.rho = 0.5;
    bps.emplace(m, build_program(s.cfg, s.ch, s.grid, make_covert_data(s.cfg, s.ch, m), rq));
  }
  // Default scenario, bounded: W1 and T as 2N real blocks plus the (N+1) LMI.
  const BuiltProgram& b = bps.at(WcsiMode::Bounded);
  CHECK(b.built.problem.dims.s == std::vector<int>{20, 20, 22});
  CHECK(bps.at(WcsiMode::Statistical).built.problem.dims.s == std::vector<int>{20, 20});
  CHECK(bps.at(WcsiMode::Gaussian).built.problem.dims.s == std::vector<int>{20, 20, 20});
  CHECK(b.built.problem.dims.q.front() == 1 + 180 + 12);  // objective epigraph

  // Switching modes swaps only the covertness rows; shared rows agree on the
  // shared variables and leave the mode's auxiliaries untouched.
  const int shared = 2 + 2 * 100;  // t, eta, W1, T
  for (auto& [m, bp] : bps) {
    for (const ConstraintInfo& ci : b.built.constraints) {
      if (is_covert_tag(ci.tag)) continue;
      const ConstraintInfo& cj = find(bp, ci.tag);
      REQUIRE(ci.rows == cj.rows);
      bool eq = ci.kind == RowKind::Equality;
      const RMat& Gi = eq ? b.built.problem.A : b.built.problem.G;
      const RMat& Gj = eq ? bp.built.problem.A : bp.built.problem.G;
      const RVec& hi = eq ? b.built.problem.b : b.built.problem.h;
      const RVec& hj = eq ? bp.built.problem.b : bp.built.problem.h;
      CHECK(Gi.block(ci.first_row, 0, ci.rows, shared) == Gj.block(cj.first_row, 0, cj.rows, shared));
      CHECK(hi.segment(ci.first_row, ci.rows) == hj.segment(cj.first_row, cj.rows));
      CHECK(Gj.block(cj.first_row, shared, cj.rows, Gj.cols() - shared).isZero(0.0));
    }
    for (const std::string& t : tags(bp))
      if (!is_covert_tag(t)) CHECK_NOTHROW(find(b, t));
  }
}

TEST_CASE("covertness rows only raise the relaxed optimum") {
  Scenario s;
  for (WcsiMode m : {WcsiMode::Bounded, WcsiMode::Gaussian, WcsiMode::Statistical, WcsiMode::Instantaneous}) {
    CovertData cd = make_covert_data(s.cfg, s.ch, m);
    ProgramRequest with;
    with.mode = m;
    ProgramRequest without = with;
    without.covert = false;
    BuiltProgram a = build_program(s.cfg, s.ch, s.grid, cd, with);
    BuiltProgram b = build_program(s.cfg, s.ch, s.grid, cd, without);
    ConicSolution sa = solve_conic(a.built.problem), sb = solve_conic(b.built.problem);
    REQUIRE(sa.status == ConicStatus::Optimal);
    REQUIRE(sb.status == ConicStatus::Optimal);
    CHECK(sa.pcost >= sb.pcost - 1e-7 * std::abs(sb.pcost));

    // The epigraph value squared is the re-evaluated sensing objective.
    ProgramPoint p = extract_point(a, sa.x);
    double t = sa.pcost + a.built.objective_offset;
    CHECK(t * t == doctest::Approx(brute_objective(s.cfg, p.W1 + p.T, p.eta)).epsilon(1e-5));
    auto cm = covertness_margin(s.cfg, s.ch, m, Benchmark::Dfan, p.W1, p.T);
    REQUIRE(cm.has_value());
    CHECK(*cm >= -1e-7);
  }
}

TEST_CASE("feasibility check") {
  {
    SystemConfig c;
    c.epsilon = 0.999999;
    c.R_min = 0.0;
    Scenario s(c);
    FeasibilityReport r = feasibility_check(s.cfg, s.ch, s.grid, WcsiMode::Bounded);
    CHECK(r.feasible);
  }
  {
    SystemConfig c;
    c.R_min = 60.0;
    Scenario s(c);
    for (WcsiMode m : {WcsiMode::Bounded, WcsiMode::Statistical}) {
      FeasibilityReport r = feasibility_check(s.cfg, s.ch, s.grid, m);
      CHECK_FALSE(r.feasible);
      CHECK_FALSE(r.solver_failure);
      CHECK(r.binding == "rate");
    }
  }
  Scenario s;
  for (WcsiMode m : {WcsiMode::Bounded, WcsiMode::Gaussian, WcsiMode::Statistical, WcsiMode::Instantaneous}) {
    FeasibilityReport r = feasibility_check(s.cfg, s.ch, s.grid, m);
    REQUIRE(r.feasible);
    double hb = s.ch.h_b.squaredNorm();
    CHECK(covert_rate_constraint(r.W1, r.T, s.ch.h_b, s.cfg.R_min, s.cfg.sigma_b2) >= -1e-7 * hb);
    CHECK(*covertness_margin(s.cfg, s.ch, m, Benchmark::Dfan, r.W1, r.T) >= -1e-7);
    CHECK(power_constraint(r.W1, s.cfg.P_t, s.cfg.P_A_max) >= -1e-8);
    CHECK(r.T.trace().real() == doctest::Approx(s.cfg.P_A).epsilon(1e-8));
  }
}

TEST_CASE("penalty loop on the default scenario") {
  Scenario s;
  DesignSolution sol = algorithm1(s.cfg, s.ch, s.grid, WcsiMode::Bounded);
  REQUIRE(sol.status == "success");
  CHECK(min_eigenvalue(sol.W1) >= -1e-8 * sol.W1.trace().real());
  CHECK(min_eigenvalue(sol.T) >= -1e-8 * sol.T.trace().real());
  CHECK(sol.W1.trace().real() <= s.cfg.w1_budget() + 1e-8);
  CHECK(std::abs(sol.T.trace().real() - s.cfg.P_A) <= 1e-8);
  CHECK(sol.rank_ratio <= 1e-3);
  CHECK(sol.rate >= s.cfg.R_min - 1e-4);
  REQUIRE(sol.covert_margin.has_value());
  CHECK(*sol.covert_margin >= -1e-8);
  CHECK(sol.objective == doctest::Approx(brute_objective(s.cfg, sol.W1 + sol.T, sol.eta)).epsilon(1e-9));

  // The feasible start is already rank one here, so the first inner loop
  // settles after two solves with no penalty left.
  REQUIRE(!sol.trace.records.empty());
  int first_outer = 0;
  for (auto& r : sol.trace.records) first_outer += r.outer == 0;
  CHECK(first_outer <= 2);
  CHECK(sol.trace.records.back().penalty <= 1e-6 * s.cfg.w1_budget());

  for (size_t i = 1; i < sol.trace.records.size(); ++i)
    if (sol.trace.records[i].outer == sol.trace.records[i - 1].outer)
      CHECK(sol.trace.records[i].objective <= sol.trace.records[i - 1].objective + 1e-6);

  // Rotating Bob's channel by a global phase changes nothing.
  for (double phi : {kPi / 7, kPi / 3}) {
    ChannelSet rot = s.ch;
    rot.h_b *= std::polar(1.0, phi);
    DesignSolution r = algorithm1(s.cfg, rot, s.grid, WcsiMode::Bounded);
    REQUIRE(r.ok());
    CHECK(r.rate == doctest::Approx(sol.rate).epsilon(1e-6));
    CHECK(r.objective == doctest::Approx(sol.objective).epsilon(1e-6));
  }
}

TEST_CASE("benchmark schemes") {
  Scenario s;
  DesignSolution dfan = benchmark_solve(s.cfg, s.ch, s.grid, WcsiMode::Statistical, Benchmark::Dfan);
  DesignSolution only = benchmark_solve(s.cfg, s.ch, s.grid, WcsiMode::Statistical, Benchmark::SensingOnly);
  DesignSolution ideal = benchmark_solve(s.cfg, s.ch, s.grid, WcsiMode::Statistical, Benchmark::IdealIc);
  REQUIRE(dfan.ok());
  REQUIRE(only.ok());
  REQUIRE(ideal.ok());
  CHECK(only.objective <= dfan.objective + 1e-6);
  CHECK(only.objective <= ideal.objective + 1e-6);
  CHECK(ideal.objective <= dfan.objective + 1e-6);
  CHECK_FALSE(only.covert_margin.has_value());
  CHECK_FALSE(ideal.covert_margin.has_value());
  CHECK(dfan.covert_margin.has_value());
  CHECK(ideal.rate >= s.cfg.R_min - 1e-4);

  CHECK(parse_benchmark("without-an") == Benchmark::WithoutAn);
  CHECK_THROWS(parse_benchmark("nonsense"));
  for (Benchmark b : {Benchmark::Dfan, Benchmark::Sfan, Benchmark::WithoutAn, Benchmark::SensingOnly,
                      Benchmark::DedicatedSic, Benchmark::IdealIc})
    CHECK(parse_benchmark(to_string(b)) == b);
}

TEST_CASE("solution file round trip") {
  Scenario s;
  DesignSolution sol = algorithm1(s.cfg, s.ch, s.grid, WcsiMode::Statistical);
  REQUIRE(sol.ok());
  LoadedSolution back = solution_from_json(solution_to_json(sol, s.cfg));
  CHECK((back.sol.W1 - sol.W1).norm() == 0.0);
  CHECK((back.sol.T - sol.T).norm() == 0.0);
  CHECK((back.sol.w1 - sol.w1).norm() == 0.0);
  CHECK(back.sol.objective == sol.objective);
  CHECK(back.sol.rate == sol.rate);
  CHECK(back.sol.covert_margin == sol.covert_margin);
  CHECK(back.sol.mode == WcsiMode::Statistical);
  CHECK(back.sol.scheme == Benchmark::Dfan);
  REQUIRE(back.sol.trace.records.size() == sol.trace.records.size());
  CHECK(back.sol.trace.solves == sol.trace.solves);
  CHECK(back.sol.trace.rho_schedule == sol.trace.rho_schedule);
  for (size_t i = 0; i < sol.trace.records.size(); ++i) {
    CHECK(back.sol.trace.records[i].objective == sol.trace.records[i].objective);
    CHECK(back.sol.trace.records[i].penalty == sol.trace.records[i].penalty);
    CHECK(back.sol.trace.records[i].status == sol.trace.records[i].status);
  }
  CHECK(back.cfg.seed == s.cfg.seed);
  CHECK(back.cfg.N == s.cfg.N);
  CHECK_THROWS(solution_from_json("{}"));
  CHECK_THROWS(solution_from_json("not json"));
}

TEST_CASE("largest covert rate grows with the covert budget") {
  Scenario s;
  double prev = -1.0;
  for (double Pb : {1.0, 3.0, 6.0}) {
    DesignSolution d = max_rate_design(s.cfg, s.ch, s.grid, WcsiMode::Bounded, Benchmark::Dfan, Pb, s.cfg.L_max);
    REQUIRE(d.ok());
    CHECK(d.W1.trace().real() <= Pb + 1e-7);
    CHECK(d.rate >= prev - 1e-4);
    CHECK(*d.covert_margin >= -1e-8);
    prev = d.rate;
  }
}

TEST_CASE("largest covert rate when the relaxed optimum is not rank one") {
  // Uncapped with a small DFAN budget: the relaxed rate optimum spreads
  // power over several directions that Bob does not see.
  Scenario s;
  s.cfg.P_A_max = 2.5;
  s.cfg.P_A = 1.5;
  s.ch = generate_channels(s.cfg);
  const double budget = s.cfg.P_t - s.cfg.P_A_max;
  DesignSolution d = max_rate_design(s.cfg, s.ch, s.grid, WcsiMode::Bounded, Benchmark::Dfan, budget,
                                     std::numeric_limits<double>::infinity());
  REQUIRE(d.ok());
  CHECK(d.trace.records.front().penalty > 1.0);
  CHECK(d.rank_ratio <= 1e-3);
  CHECK(d.rate > 18.0);
  CHECK(d.rate == doctest::Approx(d.trace.records.back().objective).epsilon(1e-6));
  CHECK(*d.covert_margin >= -1e-8);
  CHECK(d.W1.trace().real() <= budget + 1e-7);
}
