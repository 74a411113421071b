#include "cli.hpp"

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "covert_isac/csv.hpp"
#include "covert_isac/detection.hpp"

namespace cisac::cli {

namespace fs = std::filesystem;

SweepParam parse_sweep_param(const std::string& s) {
  if (s == "P_b_max") return SweepParam::PbMax;
  if (s == "P_A_max") return SweepParam::PaMax;
  if (s == "R_min") return SweepParam::Rmin;
  if (s == "max_objective") return SweepParam::MaxObjective;
  throw ConfigError("unknown sweep parameter: " + s);
}

std::string to_string(SweepParam p) {
  switch (p) {
    case SweepParam::PbMax: return "P_b_max";
    case SweepParam::PaMax: return "P_A_max";
    case SweepParam::Rmin: return "R_min";
    case SweepParam::MaxObjective: return "max_objective";
  }
  return "?";
}

std::vector<double> sweep_points(const SweepSpec& spec) {
  if (spec.steps < 2) throw ConfigError("sweep: steps must be at least 2");
  if (!(spec.from < spec.to)) throw ConfigError("sweep: from must be below to");
  std::vector<double> xs(spec.steps);
  for (int i = 0; i < spec.steps; ++i)
    xs[i] = i + 1 == spec.steps ? spec.to : spec.from + (spec.to - spec.from) * i / (spec.steps - 1);
  return xs;
}

PointSetup point_setup(const SystemConfig& base, const SweepSpec& spec, double x) {
  PointSetup ps{base, base.P_b_max.value_or(base.w1_budget()), base.L_max};
  switch (spec.parameter) {
    case SweepParam::PbMax: ps.P_b_max = x; break;
    case SweepParam::PaMax: {
      double pa_max = spec.pt_sevenths ? x * base.P_t / 7.0 : x;
      ps.cfg.P_A_max = pa_max;
      ps.cfg.P_A = pa_max - 1.0;
      ps.P_b_max = base.P_t - pa_max;
      break;
    }
    case SweepParam::Rmin: ps.cfg.R_min = x; break;
    case SweepParam::MaxObjective: ps.L_max = x; break;
  }
  return ps;
}

namespace {

SweepRow run_point(const SystemConfig& base, const SweepSpec& spec, const SweepOptions& opt, double x,
                   std::uint64_t seed) {
  SweepRow row;
  row.param = x;
  row.seed = seed;
  row.mode = opt.mode;
  row.scheme = opt.scheme;
  try {
    PointSetup ps = point_setup(base, spec, x);
    ps.cfg.seed = seed;
    require_valid(ps.cfg);
    ChannelSet ch = generate_channels(ps.cfg);
    SteeringGrid grid = make_grid(ps.cfg);
    DesignSolution sol = spec.parameter == SweepParam::Rmin
                             ? benchmark_solve(ps.cfg, ch, grid, opt.mode, opt.scheme, opt.solve)
                             : max_rate_design(ps.cfg, ch, grid, opt.mode, opt.scheme, ps.P_b_max, ps.L_max,
                                               opt.solve);
    row.status = sol.status;
    if (sol.ok()) {
      row.covert_rate = sol.rate;
      row.objective = sol.objective;
    }
  } catch (const std::exception&) {
    row.status = "error";
  }
  if (row.status != "success" && row.status != "warning") {
    row.covert_rate = std::nan("");
    row.objective = std::nan("");
  }
  return row;
}

}  // namespace

std::vector<SweepRow> run_sweep(const SystemConfig& cfg, const SweepSpec& spec, const SweepOptions& opt) {
  if (opt.seeds < 1) throw ConfigError("sweep: seeds must be positive");
  std::vector<double> xs = sweep_points(spec);
  const size_t total = xs.size() * static_cast<size_t>(opt.seeds);
  std::vector<SweepRow> rows(total);
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (size_t i = next++; i < total; i = next++) {
      size_t p = i / opt.seeds, s = i % opt.seeds;
      rows[i] = run_point(cfg, spec, opt, xs[p], cfg.seed + s);
    }
  };
  int nt = opt.threads > 0 ? opt.threads : worker_threads();
  nt = static_cast<int>(std::min<size_t>(std::max(nt, 1), total));
  std::vector<std::thread> pool;
  for (int t = 1; t < nt; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  os << "param,seed,mode,benchmark,covert_rate,objective,status\n";
  for (const SweepRow& r : rows)
    os << csv_num(r.param) << ',' << r.seed << ',' << to_string(r.mode) << ',' << to_string(r.scheme) << ','
       << csv_num(r.covert_rate) << ',' << csv_num(r.objective) << ',' << r.status << '\n';
  return os.str();
}

CovariancePair reference_design(const SystemConfig& cfg, const ChannelSet& ch) {
  CVec u = ch.h_b / ch.h_b.norm();
  CovariancePair p;
  p.W1 = ch.P_b * u * u.adjoint();
  p.T = CMat::Identity(cfg.N, cfg.N) * (cfg.P_A / cfg.N);
  return p;
}

double dep_tolerance(long samples) { return 0.005 * std::max(1.0, std::sqrt(1e6 / samples)); }

std::vector<DepRow> validate_dep(const SystemConfig& cfg, WcsiMode mode, const CovariancePair& design,
                                 long samples, std::uint64_t seed) {
  ChannelSet ch = generate_channels(cfg);
  std::vector<DepRow> rows;
  auto add = [&](const std::string& q, double cf, double mc, double hw) {
    rows.push_back({mode, q, cf, mc, hw, std::abs(cf - mc)});
  };
  const double s2 = cfg.sigma_w2, pmin = cfg.P_A_min, pmax = cfg.P_A_max;
  const CMat Tn = design.T / cfg.P_A;

  switch (mode) {
    case WcsiMode::Bounded:
    case WcsiMode::Gaussian: {
      // Willie's detector conditional on the estimated channel.
      BoundedDepInputs in{quad_form(Tn, ch.h_w_hat), quad_form(design.W1, ch.h_w_hat), s2, pmin, pmax};
      DetectionResult r = min_dep_bounded(in);
      McEstimate at_star = mc_bounded(in, r.gamma_star, samples, seed);
      add("P_FA", pfa_bounded(in, r.gamma_star), at_star.pfa, at_star.hw_pfa);
      add("P_MD", pmd_bounded(in, r.gamma_star), at_star.pmd, at_star.hw_pmd);
      add("xi_star", r.xi_star, at_star.xi, at_star.hw_xi);
      // A threshold inside both sloped branches.
      double g = s2 + in.rho2 + (pmin + 0.5 * (pmax - pmin)) * in.rho1;
      McEstimate mid = mc_bounded(in, g, samples, seed + 1);
      add("P_FA_mid", pfa_bounded(in, g), mid.pfa, mid.hw_pfa);
      add("P_MD_mid", pmd_bounded(in, g), mid.pmd, mid.hw_pmd);
      break;
    }
    case WcsiMode::Statistical: {
      StatisticalDepParams p;
      p.lambda_A = ch.l_w * (ch.Omega_w * Tn).trace().real();
      p.lambda_w1 = ch.l_w * (ch.Omega_w * design.W1).trace().real();
      // A silent design is the limit lambda_w1 -> 0.
      if (!(p.lambda_w1 > 0.0)) p.lambda_w1 = 1e-12 * p.lambda_A * pmax;
      p.t_A = p.lambda_A;
      p.P_A_min = pmin;
      p.P_A_max = pmax;
      p.sigma_w2 = s2;
      DetectionResult r = min_dep_statistical_conditional(p);
      McEstimate at_star = mc_statistical(p, r.gamma_star, samples, seed);
      add("P_FA", pfa_statistical(p, r.gamma_star), at_star.pfa, at_star.hw_pfa);
      add("P_MD", pmd_statistical(p, r.gamma_star), at_star.pmd, at_star.hw_pmd);
      add("xi_star", r.xi_star, at_star.xi, at_star.hw_xi);
      double g = s2 + 0.5 * (pmin + pmax) * p.t_A;
      McEstimate mid = mc_statistical(p, g, samples, seed + 1);
      add("P_FA_mid", pfa_statistical(p, g), mid.pfa, mid.hw_pfa);
      add("P_MD_mid", pmd_statistical(p, g), mid.pmd, mid.hw_pmd);
      McEstimate avg = mc_avg_statistical(p, samples, seed + 2);
      add("xi_bar_star", avg_min_dep_statistical(p), avg.xi, avg.hw_xi);
      add("xi_bar_star_exact", avg_min_dep_statistical_exact(p), avg.xi, avg.hw_xi);
      break;
    }
    case WcsiMode::Instantaneous: {
      double rho1 = ch.l_w * (ch.Omega_w * Tn).trace().real();
      double P_b = ch.l_w * (ch.Omega_w * design.W1).trace().real() / rho1;
      McEstimate mc = mc_instantaneous(P_b, rho1, pmin, pmax, s2, samples, seed);
      add("xi_bar2_star", avg_min_dep_instantaneous(P_b, pmin, pmax).xi_bar, mc.xi, mc.hw_xi);
      add("xi_bar2_star_exact", avg_min_dep_instantaneous_exact(P_b, pmin, pmax), mc.xi, mc.hw_xi);
      break;
    }
  }
  return rows;
}

std::string dep_csv(const std::vector<DepRow>& rows) {
  std::ostringstream os;
  os << "mode,quantity,closed_form,monte_carlo,half_width,abs_err\n";
  for (const DepRow& r : rows)
    os << to_string(r.mode) << ',' << r.quantity << ',' << csv_num(r.closed_form) << ',' << csv_num(r.monte_carlo)
       << ',' << csv_num(r.half_width) << ',' << csv_num(r.abs_err) << '\n';
  return os.str();
}

// ---------------------------------------------------------------------------

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

// stdout when path is empty or "-".
void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-")
    std::cout << text;
  else
    write_file(path, text);
}

SystemConfig config_from(const std::string& path) {
  SystemConfig cfg = path.empty() ? SystemConfig{} : load_config(path);
  require_valid(cfg);
  return cfg;
}

double parse_limit(const std::string& s) {
  if (s == "inf" || s == "none") return std::numeric_limits<double>::infinity();
  size_t pos = 0;
  double v = std::stod(s, &pos);
  if (pos != s.size() || !(v > 0.0)) throw ConfigError("bad --L-max value: " + s);
  return v;
}

struct Common {
  std::string config;
  std::string mode = "bounded";
  std::string benchmark = "dfan";
  std::optional<std::uint64_t> seed;
  double timeout_s = 0.0;
  std::string out;
};

int cmd_solve(const Common& c) {
  SystemConfig cfg = config_from(c.config);
  if (c.seed) cfg.seed = *c.seed;
  WcsiMode mode = parse_mode(c.mode);
  Benchmark scheme = parse_benchmark(c.benchmark);
  ChannelSet ch = generate_channels(cfg);
  SteeringGrid grid = make_grid(cfg);
  SolveOptions opt;
  opt.timeout_s = c.timeout_s;
  DesignSolution sol = benchmark_solve(cfg, ch, grid, mode, scheme, opt);

  fs::path dir = c.out.empty() ? fs::path(".") : fs::path(c.out);
  write_file(dir / "solution.json", solution_to_json(sol, cfg) + "\n");
  if (sol.ok()) {
    CovariancePair p{sol.w1 * sol.w1.adjoint(), sol.T, sol.eta};
    write_file(dir / "beampattern.csv", beampattern_csv(p, grid));
  }
  nlohmann::json summary = {{"status", sol.status}, {"mode", to_string(mode)}, {"benchmark", to_string(scheme)}};
  if (!sol.message.empty()) summary["message"] = sol.message;
  if (sol.ok()) {
    summary["objective"] = sol.objective;
    summary["covert_rate"] = sol.rate;
    summary["rank_ratio"] = sol.rank_ratio;
    summary["solves"] = sol.trace.solves;
  } else if (sol.feasibility && !sol.feasibility->binding.empty()) {
    summary["binding"] = sol.feasibility->binding;
  }
  (sol.ok() ? std::cout : std::cerr) << summary.dump(2) << "\n";
  if (sol.ok()) return kOk;
  return sol.status == "infeasible" ? kInfeasible : kSolverFailure;
}

int cmd_sweep(const Common& c, const SweepSpec& spec, int seeds, const std::string& L_max) {
  SystemConfig cfg = config_from(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (!L_max.empty()) cfg.L_max = parse_limit(L_max);
  if (spec.pt_sevenths && spec.parameter != SweepParam::PaMax)
    throw ConfigError("--pt-sevenths applies to P_A_max sweeps only");
  SweepOptions opt;
  opt.mode = parse_mode(c.mode);
  opt.scheme = parse_benchmark(c.benchmark);
  opt.seeds = seeds;
  opt.solve.timeout_s = c.timeout_s;
  emit(c.out, sweep_csv(run_sweep(cfg, spec, opt)));
  return kOk;
}

int cmd_validate_dep(const Common& c, long samples, const std::string& solution) {
  if (samples < 10000) throw ConfigError("--samples must be at least 10000");
  SystemConfig cfg;
  CovariancePair design;
  if (!solution.empty()) {
    LoadedSolution ls = solution_from_json(read_file(solution));
    cfg = ls.cfg;
    design = {ls.sol.W1, ls.sol.T, ls.sol.eta};
  } else {
    cfg = config_from(c.config);
    if (c.seed) cfg.seed = *c.seed;
    design = reference_design(cfg, generate_channels(cfg));
  }
  std::uint64_t seed = c.seed.value_or(cfg.seed);
  std::vector<DepRow> rows = validate_dep(cfg, parse_mode(c.mode), design, samples, seed);
  emit(c.out, dep_csv(rows));
  double tol = dep_tolerance(samples);
  for (const DepRow& r : rows)
    if (r.abs_err > tol) {
      std::cerr << "closed form and simulation disagree on " << r.quantity << " by " << r.abs_err << "\n";
      return kSolverFailure;
    }
  return kOk;
}

int cmd_beampattern(const std::string& solution, const std::string& out) {
  LoadedSolution ls = solution_from_json(read_file(solution));
  SteeringGrid grid = make_grid(ls.cfg);
  CovariancePair p{ls.sol.W1, ls.sol.T, ls.sol.eta};
  if (ls.sol.w1.size() == ls.cfg.N) p.W1 = ls.sol.w1 * ls.sol.w1.adjoint();
  emit(out, beampattern_csv(p, grid));
  return kOk;
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Covert ISAC beamforming with dual-functional artificial noise"};
  app.require_subcommand(1);
  Common c;
  auto add_common = [&c](CLI::App* sub, bool with_benchmark) {
    sub->add_option("config", c.config, "JSON config (defaults when omitted)");
    sub->add_option("--mode", c.mode, "bounded | gaussian | statistical | instantaneous");
    if (with_benchmark)
      sub->add_option("--benchmark", c.benchmark,
                      "dfan | sfan | without-an | sensing-only | dedicated-sic | ideal-ic");
    sub->add_option("--seed", c.seed, "channel seed (overrides the config)");
    sub->add_option("--timeout-s", c.timeout_s, "wall-clock limit per design, seconds");
  };

  auto* solve = app.add_subcommand("solve", "feasibility check and penalty loop for one scenario");
  add_common(solve, true);
  solve->add_option("--out", c.out, "output directory for solution.json and beampattern.csv");

  SweepSpec spec;
  std::string param = "P_b_max", L_max;
  int seeds = 10;
  auto* sweep = app.add_subcommand("sweep", "covert rate or objective over one parameter");
  add_common(sweep, true);
  sweep->add_option("--param", param, "P_b_max | P_A_max | R_min | max_objective");
  sweep->add_option("--from", spec.from)->required();
  sweep->add_option("--to", spec.to)->required();
  sweep->add_option("--steps", spec.steps)->required();
  sweep->add_option("--seeds", seeds, "number of channel seeds per point");
  sweep->add_option("--L-max", L_max, "sensing cap for rate sweeps ('inf' for none)");
  sweep->add_flag("--pt-sevenths", spec.pt_sevenths, "P_A_max = x P_t / 7");
  sweep->add_option("--out", c.out, "CSV path (stdout when omitted)");

  long samples = 1000000;
  std::string solution;
  auto* vdep = app.add_subcommand("validate-dep", "closed-form detection errors against simulation");
  add_common(vdep, false);
  vdep->add_option("--samples", samples);
  vdep->add_option("--solution", solution, "design to evaluate (reference design when omitted)");
  vdep->add_option("--out", c.out, "CSV path (stdout when omitted)");

  std::string bp_solution;
  auto* bp = app.add_subcommand("beampattern", "beampattern CSV of a solution file");
  bp->add_option("solution", bp_solution)->required();
  bp->add_option("--out", c.out, "CSV path (stdout when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }
  try {
    if (*solve) return cmd_solve(c);
    if (*sweep) {
      spec.parameter = parse_sweep_param(param);
      return cmd_sweep(c, spec, seeds, L_max);
    }
    if (*vdep) return cmd_validate_dep(c, samples, solution);
    if (*bp) return cmd_beampattern(bp_solution, c.out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kSolverFailure;
  }
  return kUsage;
}

}  // namespace cisac::cli
