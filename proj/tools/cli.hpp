#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "covert_isac/beampattern.hpp"
#include "covert_isac/optimizer.hpp"
#include "covert_isac/scenario.hpp"

namespace cisac::cli {

enum ExitCode { kOk = 0, kUsage = 1, kInfeasible = 2, kSolverFailure = 3 };

enum class SweepParam { PbMax, PaMax, Rmin, MaxObjective };
SweepParam parse_sweep_param(const std::string& s);
std::string to_string(SweepParam p);

struct SweepSpec {
  SweepParam parameter = SweepParam::PbMax;
  double from = 0.0;
  double to = 1.0;
  int steps = 2;
  // P_A_max sweeps only: x counts sevenths of the total budget, P_A_max = x P_t / 7.
  bool pt_sevenths = false;
};
// Throws ConfigError unless steps >= 2 and from < to.
std::vector<double> sweep_points(const SweepSpec& spec);

// Settings of one sweep point: P_A_max points also set P_A = P_A_max - 1 and
// P_b_max = P_t - P_A_max.
struct PointSetup {
  SystemConfig cfg;
  double P_b_max = 0.0;
  double L_max = 0.0;
};
PointSetup point_setup(const SystemConfig& base, const SweepSpec& spec, double x);

struct SweepOptions {
  WcsiMode mode = WcsiMode::Bounded;
  Benchmark scheme = Benchmark::Dfan;
  int seeds = 10;
  int threads = 0;  // <= 0: worker_threads()
  SolveOptions solve;
};

struct SweepRow {
  double param = 0.0;
  std::uint64_t seed = 0;
  WcsiMode mode = WcsiMode::Bounded;
  Benchmark scheme = Benchmark::Dfan;
  double covert_rate = 0.0;
  double objective = 0.0;
  std::string status;
};

// Rows in param-then-seed order whatever the completion order. Seeds are
// cfg.seed, cfg.seed + 1, ...
std::vector<SweepRow> run_sweep(const SystemConfig& cfg, const SweepSpec& spec, const SweepOptions& opt);
std::string sweep_csv(const std::vector<SweepRow>& rows);

struct DepRow {
  WcsiMode mode = WcsiMode::Bounded;
  std::string quantity;
  double closed_form = 0.0;
  double monte_carlo = 0.0;
  double half_width = 0.0;
  double abs_err = 0.0;
};

// Reference design when no solution is given: W1 = P_b h_b h_b^H/|h_b|^2 and
// T = P_A I/N.
CovariancePair reference_design(const SystemConfig& cfg, const ChannelSet& ch);

// Closed forms against simulation for the detector model of `mode`, with the
// channel statistics taken from the design.
std::vector<DepRow> validate_dep(const SystemConfig& cfg, WcsiMode mode, const CovariancePair& design,
                                 long samples, std::uint64_t seed);
std::string dep_csv(const std::vector<DepRow>& rows);
// 0.005 at 10^6 samples, widened as 1/sqrt(samples) below that.
double dep_tolerance(long samples);

int run(int argc, char** argv);

}  // namespace cisac::cli
