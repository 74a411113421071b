#pragma once

#include <optional>
#include <string>
#include <vector>

#include "covert_isac/beampattern.hpp"
#include "covert_isac/constraints.hpp"
#include "covert_isac/program.hpp"
#include "covert_isac/scenario.hpp"

namespace cisac {

enum class Benchmark { Dfan, Sfan, WithoutAn, SensingOnly, DedicatedSic, IdealIc };

std::string to_string(Benchmark b);
Benchmark parse_benchmark(const std::string& s);

// Which row families a scheme uses.
struct SchemeRows {
  bool covert = true;
  bool rate = true;
  bool has_T = true;
  bool T_in_pattern = true;
  bool w1_floor = false;  // Tr(W1) >= P_A when the information beam does all the sensing
};
SchemeRows scheme_rows(Benchmark b);

// Warden data in units of |h_w_hat|: the covertness conditions are
// homogeneous in h_w, so the programs use u = h_w_hat/|h_w_hat|,
// eps_w/|h_w_hat| and gamma_w/|h_w_hat|^2.
struct CovertData {
  CVec u;
  double eps_rel = 0.0;
  CMat gamma_sqrt_rel;
  CMat Omega;
  double tau_eps = 0.0;  // statistical mode only
  CovertParams cp;
};
CovertData make_covert_data(const SystemConfig& cfg, const ChannelSet& ch, WcsiMode mode);

enum class Goal { MinObjective, Feasibility, MaxRate };

struct ProgramRequest {
  WcsiMode mode = WcsiMode::Bounded;
  Benchmark scheme = Benchmark::Dfan;
  Goal goal = Goal::MinObjective;
  bool rate = true;    // switches used by infeasibility diagnosis
  bool covert = true;
  std::optional<CVec> w_l;  // DC constraint direction
  double rho = 0.0;         // DC constraint level
  std::optional<CVec> sic_direction;
  std::optional<double> w1_budget;  // defaults to P_t - P_A_max
  std::optional<double> L_max;      // cap on the sensing objective (rate programs)
  std::optional<double> R_min;      // overrides cfg.R_min
  double sinr = 0.0;                // MaxRate: Dinkelbach ratio estimate
};

struct ProgramVars {
  std::optional<ScalarVar> eta, t, lambda1, bx, by;
  HermVar W1;
  std::optional<HermVar> T;
};

struct BuiltProgram {
  ProgramBuilder::Built built;
  ProgramVars vars;
  ProgramRequest request;
};

BuiltProgram build_program(const SystemConfig& cfg, const ChannelSet& ch, const SteeringGrid& grid,
                           const CovertData& cd, const ProgramRequest& rq);

struct ProgramPoint {
  CMat W1, T;
  double eta = 0.0, lambda1 = 0.0, x = 0.0, y = 0.0;
};
ProgramPoint extract_point(const BuiltProgram& bp, const RVec& x);

// ---------------------------------------------------------------------------

struct IterationRecord {
  int outer = 0;
  int inner = 0;
  double objective = 0.0;  // sensing objective (rate for rate programs)
  double penalty = 0.0;    // Tr(W1) - lambda_1(W1)
  double rho = 0.0;
  double rank_ratio = 0.0;
  std::string status;
  double seconds = 0.0;
};

struct SolveTrace {
  std::vector<IterationRecord> records;
  std::vector<double> rho_schedule;
  int solves = 0;
  double seconds = 0.0;
};

struct SolveOptions {
  ConicOptions conic;
  double timeout_s = 0.0;  // whole run; <= 0: none
};

struct FeasibilityReport {
  bool feasible = false;
  bool solver_failure = false;
  std::string binding;  // "rate", "covertness", "rate+covertness", "power", "" when feasible
  std::string detail;
  CMat W1, T;
  int solves = 0;
};

struct DesignSolution {
  CMat W1, T;
  double eta = 0.0;
  CVec w1;
  double objective = 0.0;
  double rate = 0.0;
  std::optional<double> covert_margin;
  double rank_ratio = 0.0;
  SolveTrace trace;
  WcsiMode mode = WcsiMode::Bounded;
  Benchmark scheme = Benchmark::Dfan;
  std::string status = "success";  // success | warning | infeasible | solver-failure
  std::string message;
  std::optional<FeasibilityReport> feasibility;

  bool ok() const { return status == "success" || status == "warning"; }
};

FeasibilityReport feasibility_check(const SystemConfig& cfg, const ChannelSet& ch,
                                    const SteeringGrid& grid, WcsiMode mode,
                                    Benchmark scheme = Benchmark::Dfan, const SolveOptions& opt = {});

DesignSolution algorithm1(const SystemConfig& cfg, const ChannelSet& ch, const SteeringGrid& grid,
                          WcsiMode mode, const SolveOptions& opt = {});

DesignSolution benchmark_solve(const SystemConfig& cfg, const ChannelSet& ch, const SteeringGrid& grid,
                               WcsiMode mode, Benchmark scheme, const SolveOptions& opt = {});

// Largest covert rate subject to Tr(W1) <= P_b_max, the sensing cap
// L <= L_max (none when L_max is infinite) and the mode's covertness rows.
// Dinkelbach iterations on the relaxed programs run until the rate moves by
// less than kRateTol bits; a relaxed optimum that is not rank one goes on
// with Dinkelbach steps under a shrinking DC row.
constexpr double kRateTol = 1e-6;
constexpr int kMaxDinkelbach = 30;
DesignSolution max_rate_design(const SystemConfig& cfg, const ChannelSet& ch,
                               const SteeringGrid& grid, WcsiMode mode, Benchmark scheme,
                               double P_b_max, double L_max, const SolveOptions& opt = {});

// Covariances whose largest eigenvalue is below this (in W) count as zero;
// interior-point solutions leave ~1e-11 residue in unused blocks.
constexpr double kZeroPower = 1e-9;

// sqrt(lambda_1) v_1; the first entry of largest magnitude is made real nonnegative.
// Eigenvalue ties resolve to the lowest coordinate index; zero matrix -> zero vector.
CVec rank_one_extract(const CMat& W1);
// lambda_2 / lambda_1 (0 for the zero matrix).
double rank_ratio(const CMat& W1);

// Mode-specific covertness slack of a numeric design, in the normalized
// units of the program (>= 0 when satisfied). Nothing for schemes without
// covertness rows.
std::optional<double> covertness_margin(const SystemConfig& cfg, const ChannelSet& ch, WcsiMode mode,
                                        Benchmark scheme, const CMat& W1, const CMat& T);

std::string solution_to_json(const DesignSolution& sol, const SystemConfig& cfg, int indent = 2);
struct LoadedSolution {
  SystemConfig cfg;
  DesignSolution sol;
};
LoadedSolution solution_from_json(const std::string& text);

}  // namespace cisac
