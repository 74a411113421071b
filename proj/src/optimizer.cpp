#include "covert_isac/optimizer.hpp"

#include <cstdio>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

#include "covert_isac/detection.hpp"
#include "json.hpp"

namespace cisac {

using json = nlohmann::json;

std::string to_string(Benchmark b) {
  switch (b) {
    case Benchmark::Dfan: return "dfan";
    case Benchmark::Sfan: return "sfan";
    case Benchmark::WithoutAn: return "without-an";
    case Benchmark::SensingOnly: return "sensing-only";
    case Benchmark::DedicatedSic: return "dedicated-sic";
    case Benchmark::IdealIc: return "ideal-ic";
  }
  return "?";
}

Benchmark parse_benchmark(const std::string& s) {
  for (Benchmark b : {Benchmark::Dfan, Benchmark::Sfan, Benchmark::WithoutAn, Benchmark::SensingOnly,
                      Benchmark::DedicatedSic, Benchmark::IdealIc})
    if (to_string(b) == s) return b;
  throw std::invalid_argument("unknown benchmark scheme: " + s);
}

SchemeRows scheme_rows(Benchmark b) {
  SchemeRows r;
  switch (b) {
    case Benchmark::Dfan: break;
    case Benchmark::Sfan:
      r.T_in_pattern = false;
      r.w1_floor = true;
      break;
    case Benchmark::WithoutAn:
      r.covert = false;
      r.has_T = false;
      r.T_in_pattern = false;
      r.w1_floor = true;
      break;
    case Benchmark::SensingOnly:
      r.covert = false;
      r.rate = false;
      break;
    case Benchmark::DedicatedSic:
    case Benchmark::IdealIc:
      r.covert = false;
      break;
  }
  return r;
}

CovertData make_covert_data(const SystemConfig& cfg, const ChannelSet& ch, WcsiMode mode) {
  CovertData cd;
  cd.cp = CovertParams{cfg.epsilon, cfg.P_A_min, cfg.P_A_max, cfg.P_A};
  double nh = ch.h_w_hat.norm();
  if (!(nh > 0.0)) throw std::invalid_argument("make_covert_data: zero warden channel estimate");
  cd.u = ch.h_w_hat / nh;
  cd.eps_rel = ch.eps_w / nh;
  cd.gamma_sqrt_rel = hermitian_sqrt(ch.gamma_w) / nh;
  cd.Omega = ch.Omega_w;
  if (mode == WcsiMode::Statistical)
    cd.tau_eps = solve_tau_epsilon(cfg.epsilon, cfg.P_A_max / cfg.P_A_min);
  return cd;
}

namespace {

double leading_eigenvalue(const CMat& H) {
  Eigen::SelfAdjointEigenSolver<CMat> es(0.5 * (H + H.adjoint()), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(es.eigenvalues().size() - 1);
}

CVec unit_leading(const CMat& H) {
  CVec v = rank_one_extract(H);
  double n = v.norm();
  if (n == 0.0) {
    v = CVec::Zero(H.rows());
    v(0) = 1.0;
    return v;
  }
  return v / n;
}

// Interference matrix seen by Bob.
CMat rate_interference(const CMat& T, Benchmark scheme, const std::optional<CVec>& sic) {
  if (scheme == Benchmark::IdealIc || scheme == Benchmark::WithoutAn)
    return CMat::Zero(T.rows(), T.cols());
  if (scheme == Benchmark::DedicatedSic && sic) {
    CMat P = CMat::Identity(T.rows(), T.cols()) - (*sic) * sic->adjoint();
    return P * T * P;
  }
  return T;
}

CMat pattern_matrix(const CMat& W1, const CMat& T, Benchmark scheme) {
  return scheme_rows(scheme).T_in_pattern ? CMat(W1 + T) : W1;
}

double sensing_objective(const SystemConfig& cfg, const SteeringGrid& grid, Benchmark scheme,
                         const CMat& W1, const CMat& T, double eta) {
  CovariancePair p{pattern_matrix(W1, T, scheme), CMat::Zero(W1.rows(), W1.cols()), eta};
  return objective(p, grid, cfg);
}

}  // namespace

BuiltProgram build_program(const SystemConfig& cfg, const ChannelSet& ch, const SteeringGrid& grid,
                           const CovertData& cov, const ProgramRequest& rq) {
  const int N = cfg.N;
  if (ch.h_b.size() != N || ch.h_w_hat.size() != N)
    throw std::invalid_argument("build_program: channel dimension mismatch");
  const SchemeRows rows = scheme_rows(rq.scheme);
  const bool covert = rows.covert && rq.covert;
  const bool with_rate = rows.rate && rq.rate;

  ProgramBuilder pb;
  ProgramVars v;
  if (rq.goal == Goal::MinObjective) v.t = pb.scalar();
  if (rq.goal == Goal::MinObjective || rq.L_max) v.eta = pb.scalar();
  v.W1 = pb.hermitian(N);
  if (rows.has_T) v.T = pb.hermitian(N);
  if (covert && rq.mode == WcsiMode::Bounded) v.lambda1 = pb.scalar();
  if (covert && rq.mode == WcsiMode::Gaussian) {
    v.bx = pb.scalar();
    v.by = pb.scalar();
  }

  const ProgramVars vars = v;
  auto W1 = [vars](const Assignment& a) { return a(vars.W1); };
  auto T = [vars, N](const Assignment& a) { return vars.T ? a(*vars.T) : CMat(CMat::Zero(N, N)); };

  // Sensing residuals: (eta P*(theta_s) - a^H R a)/sqrt(S), then the target cross terms.
  const int M = cfg.M();
  std::vector<CVec> tgt;
  for (double t : cfg.target_angles_deg) tgt.push_back(steering_vector(deg2rad(t), N, cfg.spacing_ratio));
  const double inv_sqrt_S = 1.0 / std::sqrt(static_cast<double>(grid.steering.size()));
  const double cc_w = M >= 2 ? std::sqrt(2.0 * cfg.w_c / (M * M - M)) : 0.0;
  const bool T_pat = rows.T_in_pattern;
  auto residuals = [&grid, tgt, inv_sqrt_S, cc_w, M, T_pat, vars, W1, T](const Assignment& a) {
    CMat R = W1(a);
    if (T_pat) R += T(a);
    double eta = a(*vars.eta);
    int pairs = M >= 2 ? M * (M - 1) : 0;
    RVec r(grid.steering.size() + pairs);
    int p = 0;
    for (size_t s = 0; s < grid.steering.size(); ++s)
      r(p++) = (eta * grid.desired[s] - quad_form(R, grid.steering[s])) * inv_sqrt_S;
    for (int i = 0; i < M; ++i)
      for (int j = i + 1; j < M; ++j) {
        cd c = (tgt[i].adjoint() * R * tgt[j])(0, 0);
        r(p++) = cc_w * c.real();
        r(p++) = cc_w * c.imag();
      }
    return r;
  };

  if (rq.goal == Goal::MinObjective) {
    pb.minimize([vars](const Assignment& a) { return a(*vars.t); });
    pb.soc("objective", [vars, residuals](const Assignment& a) {
      RVec r = residuals(a);
      RVec out(r.size() + 1);
      out(0) = a(*vars.t);
      out.tail(r.size()) = r;
      return out;
    });
  } else if (rq.goal == Goal::MaxRate) {
    // Dinkelbach step: maximize h^H W1 h - gamma h^H T~ h, in units of |h_b|^2.
    double hb2 = ch.h_b.squaredNorm(), g = rq.sinr;
    Benchmark sch = rq.scheme;
    auto sic = rq.sic_direction;
    pb.minimize([W1, T, h = ch.h_b, hb2, g, sch, sic](const Assignment& a) {
      return (g * quad_form(rate_interference(T(a), sch, sic), h) - quad_form(W1(a), h)) / hb2;
    });
  } else {
    pb.minimize([](const Assignment&) { return 0.0; });
  }
  if (rq.L_max) {
    double cap = std::sqrt(*rq.L_max);
    pb.soc("sensing-cap", [residuals, cap](const Assignment& a) {
      RVec r = residuals(a);
      RVec out(r.size() + 1);
      out(0) = cap;
      out.tail(r.size()) = r;
      return out;
    });
  }

  pb.psd("W1-psd", W1);
  if (vars.T) {
    pb.psd("T-psd", T);
    double PA = cfg.P_A;
    pb.equal("dfan-power", [T, PA](const Assignment& a) { return T(a).trace().real() - PA; });
  }
  const double budget = rq.w1_budget.value_or(cfg.w1_budget());
  pb.nonneg("power", [W1, budget](const Assignment& a) { return budget - W1(a).trace().real(); });
  if (rows.w1_floor) {
    double PA = cfg.P_A;
    pb.nonneg("w1-floor", [W1, PA](const Assignment& a) { return W1(a).trace().real() - PA; });
  }

  if (with_rate) {
    double R_min = rq.R_min.value_or(cfg.R_min), s2 = cfg.sigma_b2;
    Benchmark sch = rq.scheme;
    auto sic = rq.sic_direction;
    pb.nonneg("rate", [W1, T, h = ch.h_b, R_min, s2, sch, sic](const Assignment& a) {
      return covert_rate_constraint(W1(a), rate_interference(T(a), sch, sic), h, R_min, s2);
    });
  }
  if (covert) {
    const CovertParams cp = cov.cp;
    switch (rq.mode) {
      case WcsiMode::Bounded: {
        pb.nonneg("lambda1", [vars](const Assignment& a) { return a(*vars.lambda1); });
        pb.psd("covert-lmi", [W1, T, vars, u = cov.u, e = cov.eps_rel, cp](const Assignment& a) {
          return s_procedure_lmi(W1(a), T(a), a(*vars.lambda1), u, e, cp);
        });
        break;
      }
      case WcsiMode::Gaussian: {
        double rc = cfg.rho_c;
        auto tri = [W1, T, u = cov.u, g = cov.gamma_sqrt_rel, rc, cp](const Assignment& a) {
          return bti_constraints_sqrt(W1(a), T(a), u, g, rc, cp);
        };
        pb.nonneg("bti-affine", [tri, vars](const Assignment& a) { return tri(a).affine(a(*vars.bx), a(*vars.by)); });
        pb.soc("bti-norm", [tri, vars](const Assignment& a) { return tri(a).soc(a(*vars.bx)); });
        pb.psd("bti-psd", [tri, vars](const Assignment& a) { return tri(a).psd(a(*vars.by)); });
        pb.nonneg("bti-y", [vars](const Assignment& a) { return a(*vars.by); });
        break;
      }
      case WcsiMode::Statistical: {
        double tau = cov.tau_eps;
        pb.nonneg("covert-statistical", [W1, T, O = cov.Omega, tau, cp](const Assignment& a) {
          return statistical_covertness(W1(a), T(a), O, tau, cp);
        });
        break;
      }
      case WcsiMode::Instantaneous: {
        pb.nonneg("covert-instantaneous", [W1, T, O = cov.Omega, cp](const Assignment& a) {
          return instantaneous_covertness(W1(a), T(a), O, cp);
        });
        break;
      }
    }
  }

  if (rq.w_l) {
    CVec w = *rq.w_l;
    double rho = rq.rho;
    pb.nonneg("dc-penalty", [W1, w, rho](const Assignment& a) { return rho - dc_penalty(W1(a), w); });
  }

  BuiltProgram bp{pb.build(), vars, rq};
  return bp;
}

ProgramPoint extract_point(const BuiltProgram& bp, const RVec& x) {
  Assignment a(x);
  const ProgramVars& v = bp.vars;
  ProgramPoint p;
  p.W1 = a(v.W1);
  p.T = v.T ? a(*v.T) : CMat(CMat::Zero(v.W1.n, v.W1.n));
  if (v.eta) p.eta = a(*v.eta);
  if (v.lambda1) p.lambda1 = a(*v.lambda1);
  if (v.bx) p.x = a(*v.bx);
  if (v.by) p.y = a(*v.by);
  return p;
}

CVec rank_one_extract(const CMat& W1) {
  const int n = static_cast<int>(W1.rows());
  Eigen::SelfAdjointEigenSolver<CMat> es(0.5 * (W1 + W1.adjoint()));
  const RVec& ev = es.eigenvalues();
  double lmax = ev(n - 1);
  if (!(lmax > kZeroPower)) return CVec::Zero(n);
  // Orthonormal basis of the (numerically) tied top eigenspace.
  double tie = 1e-12 * std::max(1.0, lmax);
  int first = n - 1;
  while (first > 0 && ev(first - 1) >= lmax - tie) --first;
  CMat Q = es.eigenvectors().rightCols(n - first);
  CVec v;
  if (Q.cols() == 1) {
    v = Q.col(0);
  } else {
    for (int k = 0; k < n; ++k) {
      CVec e = CVec::Zero(n);
      e(k) = 1.0;
      CVec p = Q * (Q.adjoint() * e);
      if (p.norm() > 1e-8) {
        v = p / p.norm();
        break;
      }
    }
  }
  int idx = 0;
  double best = -1.0;
  for (int i = 0; i < n; ++i) {
    double m = std::abs(v(i));
    if (m > best * (1.0 + 1e-12) + 1e-300) {
      best = m;
      idx = i;
    }
  }
  if (best > 0) v *= std::conj(v(idx)) / std::abs(v(idx));
  v(idx) = cd(v(idx).real(), 0.0);
  return std::sqrt(lmax) * v;
}

double rank_ratio(const CMat& W1) {
  Eigen::SelfAdjointEigenSolver<CMat> es(0.5 * (W1 + W1.adjoint()), Eigen::EigenvaluesOnly);
  const RVec& ev = es.eigenvalues();
  int n = static_cast<int>(ev.size());
  if (n < 2 || !(ev(n - 1) > kZeroPower)) return 0.0;
  return std::max(0.0, ev(n - 2)) / ev(n - 1);
}

std::optional<double> covertness_margin(const SystemConfig& cfg, const ChannelSet& ch, WcsiMode mode,
                                        Benchmark scheme, const CMat& W1, const CMat& T) {
  if (!scheme_rows(scheme).covert) return std::nullopt;
  CovertData cd = make_covert_data(cfg, ch, mode);
  switch (mode) {
    case WcsiMode::Bounded: {
      // max over lambda >= 0 of the smallest LMI eigenvalue (concave in lambda).
      CMat S1 = s1_matrix(W1, T, cd.cp);
      double hi = 4.0 * (S1.norm() + 1.0) / std::max(cd.eps_rel * cd.eps_rel, 1e-6);
      auto f = [&](double l) { return min_eigenvalue(s_procedure_lmi(W1, T, l, cd.u, cd.eps_rel, cd.cp)); };
      double lo = 0.0;
      const double g = (std::sqrt(5.0) - 1.0) / 2.0;
      double a = hi - g * (hi - lo), b = lo + g * (hi - lo);
      double fa = f(a), fb = f(b);
      for (int i = 0; i < 200 && hi - lo > 1e-14 * (1.0 + hi); ++i) {
        if (fa < fb) {
          lo = a;
          a = b;
          fa = fb;
          b = lo + g * (hi - lo);
          fb = f(b);
        } else {
          hi = b;
          b = a;
          fb = fa;
          a = hi - g * (hi - lo);
          fa = f(a);
        }
      }
      return std::max({fa, fb, f(0.0)});
    }
    case WcsiMode::Gaussian: {
      BtiTriple t = bti_constraints_sqrt(W1, T, cd.u, cd.gamma_sqrt_rel, cfg.rho_c, cd.cp);
      return t.affine(t.min_x(), t.min_y());
    }
    case WcsiMode::Statistical: return statistical_covertness(W1, T, cd.Omega, cd.tau_eps, cd.cp);
    case WcsiMode::Instantaneous: return instantaneous_covertness(W1, T, cd.Omega, cd.cp);
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------

namespace {

using Clock = std::chrono::steady_clock;

struct Iterate {
  ProgramPoint pt;
  double value = 0.0;
  ConicStatus status = ConicStatus::NumericalFailure;
  double seconds = 0.0;
};

class Runner {
 public:
  Runner(const SystemConfig& cfg, const ChannelSet& ch, const SteeringGrid& grid, WcsiMode mode,
         const SolveOptions& opt)
      : cfg_(cfg), ch_(ch), grid_(grid), mode_(mode), opt_(opt), cd_(make_covert_data(cfg, ch, mode)),
        start_(Clock::now()) {}

  double elapsed() const { return std::chrono::duration<double>(Clock::now() - start_).count(); }
  bool timed_out() const { return opt_.timeout_s > 0 && elapsed() > opt_.timeout_s; }
  int solves() const { return solves_; }

  Iterate solve(const ProgramRequest& rq) {
    auto t0 = Clock::now();
    BuiltProgram bp = build_program(cfg_, ch_, grid_, cd_, rq);
    ConicOptions co = opt_.conic;
    if (opt_.timeout_s > 0) co.timeout_s = std::max(1.0, opt_.timeout_s - elapsed());
    ConicSolution sol = solve_conic(bp.built.problem, co);
    ++solves_;
    Iterate it;
    it.status = sol.status;
    if (sol.status == ConicStatus::Optimal) {
      it.pt = extract_point(bp, sol.x);
      if (rq.goal == Goal::MinObjective)
        it.value = sensing_objective(cfg_, grid_, rq.scheme, it.pt.W1, it.pt.T, it.pt.eta);
    }
    it.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    return it;
  }

  const SystemConfig& cfg_;
  const ChannelSet& ch_;
  const SteeringGrid& grid_;
  WcsiMode mode_;
  SolveOptions opt_;
  CovertData cd_;

 private:
  Clock::time_point start_;
  int solves_ = 0;
};

FeasibilityReport feasibility_impl(Runner& run, ProgramRequest rq) {
  FeasibilityReport rep;
  rq.goal = Goal::Feasibility;
  rq.w_l.reset();
  Iterate it = run.solve(rq);
  rep.solves = 1;
  if (it.status == ConicStatus::Optimal) {
    rep.feasible = true;
    rep.W1 = it.pt.W1;
    rep.T = it.pt.T;
    return rep;
  }
  if (it.status != ConicStatus::PrimalInfeasible) {
    rep.solver_failure = true;
    rep.detail = "feasibility solve ended with status " + to_string(it.status);
    return rep;
  }
  // Name the binding family by dropping rows.
  SchemeRows rows = scheme_rows(rq.scheme);
  auto feasible_with = [&](bool rate, bool covert) {
    ProgramRequest r = rq;
    r.rate = rate;
    r.covert = covert;
    ++rep.solves;
    return run.solve(r).status == ConicStatus::Optimal;
  };
  bool has_rate = rows.rate && rq.rate, has_cov = rows.covert && rq.covert;
  const std::string base = rq.L_max ? "sensing-cap" : "power";
  if (has_rate && has_cov) {
    if (!feasible_with(true, false))
      rep.binding = "rate";
    else if (!feasible_with(false, true))
      rep.binding = "covertness";
    else
      rep.binding = "rate+covertness";
  } else if (has_rate) {
    rep.binding = feasible_with(false, false) ? "rate" : base;
  } else if (has_cov) {
    rep.binding = feasible_with(false, false) ? "covertness" : base;
  } else {
    rep.binding = base;
  }
  rep.detail = "no design satisfies the " + rep.binding + " constraints within the power budget";
  return rep;
}

void fill_outputs(DesignSolution& sol, const SystemConfig& cfg, const ChannelSet& ch, WcsiMode mode,
                  Benchmark scheme, const std::optional<CVec>& sic) {
  sol.w1 = rank_one_extract(sol.W1);
  CMat W1r = sol.w1 * sol.w1.adjoint();
  sol.rank_ratio = rank_ratio(sol.W1);
  sol.rate = covert_rate(W1r, rate_interference(sol.T, scheme, sic), ch.h_b, cfg.sigma_b2);
  sol.covert_margin = covertness_margin(cfg, ch, mode, scheme, W1r, sol.T);
}

// Nested DC penalty loop shared by the sensing and rate programs.
DesignSolution dc_loop(Runner& run, ProgramRequest base, const CMat& W1_init, const CMat& T_init,
                       DesignSolution sol) {
  const SystemConfig& cfg = run.cfg_;
  const AlgorithmConfig& ac = cfg.algo;
  const double rho_th = ac.rho_th_rel * cfg.w1_budget();
  double k = ac.shrink;
  double rho = std::max(W1_init.trace().real(), rho_th);
  CVec w_l = unit_leading(W1_init);
  CMat T_cur = T_init;

  std::optional<Iterate> good;  // last completed outer step
  double good_rho = rho;
  CVec good_wl = w_l;
  std::optional<Iterate> cur;
  double prev = std::numeric_limits<double>::quiet_NaN();
  int outer = 0, recoveries = 0;
  std::string stop_reason;

  while (true) {
    sol.trace.rho_schedule.push_back(rho);
    bool failed = false;
    ConicStatus fail_status = ConicStatus::Optimal;
    for (int inner = 0; inner < ac.max_inner; ++inner) {
      if (run.solves() >= ac.max_solves) {
        stop_reason = "solve limit reached";
        break;
      }
      if (run.timed_out()) {
        stop_reason = "timeout";
        break;
      }
      ProgramRequest rq = base;
      rq.w_l = w_l;
      rq.rho = rho;
      if (base.scheme == Benchmark::DedicatedSic) rq.sic_direction = unit_leading(T_cur);
      Iterate it = run.solve(rq);
      IterationRecord rec;
      rec.outer = outer;
      rec.inner = inner;
      rec.rho = rho;
      rec.status = to_string(it.status);
      rec.seconds = it.seconds;
      if (it.status != ConicStatus::Optimal) {
        sol.trace.records.push_back(rec);
        failed = true;
        fail_status = it.status;
        break;
      }
      rec.objective = it.value;
      rec.penalty = it.pt.W1.trace().real() - leading_eigenvalue(it.pt.W1);
      rec.rank_ratio = rank_ratio(it.pt.W1);
      sol.trace.records.push_back(rec);
      w_l = unit_leading(it.pt.W1);
      T_cur = it.pt.T;
      cur = it;
      bool settled = std::isfinite(prev) && std::abs(it.value - prev) <= ac.L_th;
      prev = it.value;
      if (settled) break;
    }
    if (!stop_reason.empty()) break;
    if (failed) {
      if (!good || recoveries >= 4) {
        stop_reason = "solver status " + to_string(fail_status);
        if (!good && !cur) {
          sol.status = fail_status == ConicStatus::PrimalInfeasible ? "infeasible" : "solver-failure";
          sol.message = "penalty program failed at the first step: " + to_string(fail_status);
          return sol;
        }
        break;
      }
      // Back off to the last completed step and shrink more gently.
      ++recoveries;
      k = 1.0 - (1.0 - k) / 2.0;
      rho = good_rho * k;
      w_l = good_wl;
      cur = good;
      T_cur = good->pt.T;
      prev = good->value;
      ++outer;
      continue;
    }
    if (!cur) break;
    good = cur;
    good_rho = rho;
    good_wl = w_l;
    double pen = cur->pt.W1.trace().real() - leading_eigenvalue(cur->pt.W1);
    if (rho <= rho_th || pen <= rho_th) break;
    rho = std::max(rho * k, rho_th * (1.0 - 1e-12));
    ++outer;
  }
  const Iterate& fin = good ? *good : *cur;
  sol.W1 = fin.pt.W1;
  sol.T = fin.pt.T;
  sol.eta = fin.pt.eta;
  sol.objective = fin.value;
  std::optional<CVec> sic;
  if (base.scheme == Benchmark::DedicatedSic) sic = unit_leading(sol.T);
  fill_outputs(sol, cfg, run.ch_, run.mode_, base.scheme, sic);
  if (!stop_reason.empty()) {
    sol.status = "warning";
    sol.message = stop_reason;
  }
  return sol;
}

DesignSolution finish_trace(DesignSolution sol, Runner& run) {
  sol.trace.solves = run.solves();
  sol.trace.seconds = run.elapsed();
  if (sol.ok() && sol.status == "success" && sol.rank_ratio > 1e-3) {
    sol.status = "warning";
    sol.message = "rank ratio above 1e-3";
  }
  return sol;
}

}  // namespace

FeasibilityReport feasibility_check(const SystemConfig& cfg, const ChannelSet& ch, const SteeringGrid& grid,
                                    WcsiMode mode, Benchmark scheme, const SolveOptions& opt) {
  Runner run(cfg, ch, grid, mode, opt);
  ProgramRequest rq;
  rq.mode = mode;
  rq.scheme = scheme;
  return feasibility_impl(run, rq);
}

DesignSolution benchmark_solve(const SystemConfig& cfg, const ChannelSet& ch, const SteeringGrid& grid,
                               WcsiMode mode, Benchmark scheme, const SolveOptions& opt) {
  require_valid(cfg);
  Runner run(cfg, ch, grid, mode, opt);
  DesignSolution sol;
  sol.mode = mode;
  sol.scheme = scheme;
  ProgramRequest rq;
  rq.mode = mode;
  rq.scheme = scheme;
  FeasibilityReport rep = feasibility_impl(run, rq);
  sol.feasibility = rep;
  if (!rep.feasible) {
    sol.status = rep.solver_failure ? "solver-failure" : "infeasible";
    sol.message = rep.detail;
    sol.W1 = CMat::Zero(cfg.N, cfg.N);
    sol.T = CMat::Zero(cfg.N, cfg.N);
    return finish_trace(sol, run);
  }
  rq.goal = Goal::MinObjective;
  sol = dc_loop(run, rq, rep.W1, rep.T, sol);
  return finish_trace(sol, run);
}

DesignSolution algorithm1(const SystemConfig& cfg, const ChannelSet& ch, const SteeringGrid& grid,
                          WcsiMode mode, const SolveOptions& opt) {
  return benchmark_solve(cfg, ch, grid, mode, Benchmark::Dfan, opt);
}

namespace {

// Rate maximization with the DC row: Dinkelbach steps at each level rho,
// then rho shrinks as in the penalty loop. W1 = 0 always satisfies the DC
// row, so no step can turn infeasible the way a rate floor can.
DesignSolution rate_dc_loop(Runner& run, ProgramRequest rq, const CMat& W1_init,
                            const std::function<double(const CMat&, const CMat&)>& sinr, DesignSolution sol) {
  const SystemConfig& cfg = run.cfg_;
  const AlgorithmConfig& ac = cfg.algo;
  const double rho_th = ac.rho_th_rel * cfg.w1_budget();
  rq.goal = Goal::MaxRate;
  rq.rate = false;
  double rho = std::max(W1_init.trace().real() - leading_eigenvalue(W1_init), rho_th);
  CVec w_l = unit_leading(W1_init);
  std::optional<Iterate> best;
  double gamma = 0.0;
  std::string stop_reason;
  for (int outer = 0; stop_reason.empty(); ++outer) {
    sol.trace.rho_schedule.push_back(rho);
    double prev = std::numeric_limits<double>::quiet_NaN();
    for (int inner = 0; inner < ac.max_inner; ++inner) {
      if (run.solves() >= ac.max_solves) stop_reason = "solve limit reached";
      if (run.timed_out()) stop_reason = "timeout";
      if (!stop_reason.empty()) break;
      rq.w_l = w_l;
      rq.rho = rho;
      rq.sinr = gamma;
      Iterate it = run.solve(rq);
      IterationRecord rec;
      rec.outer = outer;
      rec.inner = inner;
      rec.rho = rho;
      rec.status = to_string(it.status);
      rec.seconds = it.seconds;
      if (it.status != ConicStatus::Optimal) {
        sol.trace.records.push_back(rec);
        stop_reason = "solver status " + to_string(it.status);
        break;
      }
      // Every iterate is feasible at this rho, so its ratio is a valid
      // Dinkelbach estimate even after rho shrinks.
      gamma = sinr(it.pt.W1, it.pt.T);
      double r = std::log2(1.0 + gamma);
      rec.objective = r;
      rec.penalty = it.pt.W1.trace().real() - leading_eigenvalue(it.pt.W1);
      rec.rank_ratio = rank_ratio(it.pt.W1);
      sol.trace.records.push_back(rec);
      w_l = unit_leading(it.pt.W1);
      best = it;
      bool settled = std::isfinite(prev) && std::abs(r - prev) <= kRateTol;
      prev = r;
      if (settled) break;
    }
    if (!stop_reason.empty() || !best) break;
    double pen = best->pt.W1.trace().real() - leading_eigenvalue(best->pt.W1);
    if (rho <= rho_th || pen <= rho_th) break;
    rho = std::max(rho * ac.shrink, rho_th * (1.0 - 1e-12));
  }
  if (!best) {
    sol.status = "solver-failure";
    sol.message = "penalized rate program failed at the first step: " + stop_reason;
    return sol;
  }
  sol.W1 = best->pt.W1;
  sol.T = best->pt.T;
  CovariancePair cp{pattern_matrix(sol.W1, sol.T, rq.scheme), CMat::Zero(cfg.N, cfg.N), 0.0};
  sol.eta = optimal_eta(cp, run.grid_);
  sol.objective = sensing_objective(cfg, run.grid_, rq.scheme, sol.W1, sol.T, sol.eta);
  fill_outputs(sol, cfg, run.ch_, run.mode_, rq.scheme, std::nullopt);
  if (!stop_reason.empty()) {
    sol.status = "warning";
    sol.message = stop_reason;
  }
  return sol;
}

}  // namespace

DesignSolution max_rate_design(const SystemConfig& cfg, const ChannelSet& ch, const SteeringGrid& grid,
                               WcsiMode mode, Benchmark scheme, double P_b_max, double L_max,
                               const SolveOptions& opt) {
  require_valid(cfg);
  Runner run(cfg, ch, grid, mode, opt);
  DesignSolution sol;
  sol.mode = mode;
  sol.scheme = scheme;
  sol.W1 = CMat::Zero(cfg.N, cfg.N);
  sol.T = CMat::Zero(cfg.N, cfg.N);
  ProgramRequest rq;
  rq.mode = mode;
  rq.scheme = scheme;
  rq.rate = false;
  rq.w1_budget = P_b_max;
  if (std::isfinite(L_max)) rq.L_max = L_max;
  FeasibilityReport rep = feasibility_impl(run, rq);
  sol.feasibility = rep;
  if (!rep.feasible) {
    sol.status = rep.solver_failure ? "solver-failure" : "infeasible";
    sol.message = rep.detail;
    return finish_trace(sol, run);
  }
  if (!scheme_rows(scheme).rate) {
    rq.goal = Goal::MinObjective;
    sol = dc_loop(run, rq, rep.W1, rep.T, sol);
    return finish_trace(sol, run);
  }

  // Dinkelbach iteration on the SINR over the relaxed programs.
  auto sinr = [&](const CMat& W1, const CMat& T) {
    return quad_form(W1, ch.h_b) / (quad_form(rate_interference(T, scheme, std::nullopt), ch.h_b) + cfg.sigma_b2);
  };
  CMat W1_best = rep.W1, T_best = rep.T;
  double gamma = sinr(W1_best, T_best);
  bool converged = false;
  ConicStatus last = ConicStatus::Optimal;
  for (int k = 0; k < kMaxDinkelbach && !run.timed_out(); ++k) {
    rq.goal = Goal::MaxRate;
    rq.sinr = gamma;
    Iterate it = run.solve(rq);
    last = it.status;
    if (it.status != ConicStatus::Optimal) break;
    double g = sinr(it.pt.W1, it.pt.T);
    IterationRecord rec;
    rec.inner = k;
    rec.objective = std::log2(1.0 + g);
    rec.penalty = it.pt.W1.trace().real() - leading_eigenvalue(it.pt.W1);
    rec.rank_ratio = rank_ratio(it.pt.W1);
    rec.rho = std::numeric_limits<double>::infinity();
    rec.status = to_string(it.status);
    rec.seconds = it.seconds;
    sol.trace.records.push_back(rec);
    if (g >= gamma) {
      W1_best = it.pt.W1;
      T_best = it.pt.T;
    }
    // F(gamma) in rate terms: stop once the step no longer moves the rate.
    bool done = std::log2(1.0 + g) - std::log2(1.0 + gamma) <= kRateTol;
    gamma = std::max(gamma, g);
    if (done) {
      converged = true;
      break;
    }
  }
  if (!converged && last != ConicStatus::Optimal && sol.trace.records.empty()) {
    sol.status = last == ConicStatus::PrimalInfeasible ? "infeasible" : "solver-failure";
    sol.message = "rate program ended with status " + to_string(last);
    return finish_trace(sol, run);
  }
  const double pen = W1_best.trace().real() - leading_eigenvalue(W1_best);
  if (pen <= cfg.algo.rho_th_rel * cfg.w1_budget()) {
    sol.W1 = W1_best;
    sol.T = T_best;
    CovariancePair cp{pattern_matrix(W1_best, T_best, scheme), CMat::Zero(cfg.N, cfg.N), 0.0};
    sol.eta = optimal_eta(cp, grid);
    sol.objective = sensing_objective(cfg, grid, scheme, sol.W1, sol.T, sol.eta);
    fill_outputs(sol, cfg, ch, mode, scheme, std::nullopt);
  } else {
    sol = rate_dc_loop(run, rq, W1_best, sinr, sol);
  }
  if (sol.ok() && !converged) {
    sol.status = "warning";
    sol.message = "rate iteration stopped before converging";
  }
  return finish_trace(sol, run);
}

// ---------------------------------------------------------------------------
// Solution files

namespace {

json matrix_json(const CMat& M) {
  json rows = json::array();
  for (int i = 0; i < M.rows(); ++i) {
    json r = json::array();
    for (int j = 0; j < M.cols(); ++j) {
      r.push_back(M(i, j).real());
      r.push_back(M(i, j).imag());
    }
    rows.push_back(r);
  }
  return rows;
}

CMat matrix_from_json(const json& j, int n) {
  if (!j.is_array() || static_cast<int>(j.size()) != n) throw std::runtime_error("solution: bad matrix shape");
  CMat M(n, n);
  for (int i = 0; i < n; ++i) {
    const json& r = j[i];
    if (!r.is_array() || static_cast<int>(r.size()) != 2 * n) throw std::runtime_error("solution: bad matrix row");
    for (int k = 0; k < n; ++k) M(i, k) = cd(r[2 * k].get<double>(), r[2 * k + 1].get<double>());
  }
  return M;
}

}  // namespace

std::string solution_to_json(const DesignSolution& sol, const SystemConfig& cfg, int indent) {
  json j;
  j["schema"] = 1;
  j["config"] = json::parse(config_to_json(cfg));
  j["mode"] = to_string(sol.mode);
  j["benchmark"] = to_string(sol.scheme);
  j["status"] = sol.status;
  if (!sol.message.empty()) j["message"] = sol.message;
  j["W1"] = matrix_json(sol.W1);
  j["T"] = matrix_json(sol.T);
  j["eta"] = sol.eta;
  json w = json::array();
  for (int i = 0; i < sol.w1.size(); ++i) {
    w.push_back(sol.w1(i).real());
    w.push_back(sol.w1(i).imag());
  }
  j["w1"] = w;
  j["objective"] = sol.objective;
  j["rate"] = sol.rate;
  if (sol.covert_margin) j["covert_margin"] = *sol.covert_margin;
  j["rank_ratio"] = sol.rank_ratio;
  json tr;
  tr["solves"] = sol.trace.solves;
  tr["seconds"] = sol.trace.seconds;
  tr["rho_schedule"] = sol.trace.rho_schedule;
  json recs = json::array();
  for (const auto& r : sol.trace.records) {
    recs.push_back({{"outer", r.outer},
                    {"inner", r.inner},
                    {"objective", r.objective},
                    {"penalty", r.penalty},
                    {"rho", std::isfinite(r.rho) ? json(r.rho) : json(nullptr)},
                    {"rank_ratio", r.rank_ratio},
                    {"status", r.status},
                    {"seconds", r.seconds}});
  }
  tr["records"] = recs;
  j["trace"] = tr;
  if (sol.feasibility && !sol.feasibility->feasible) {
    j["infeasibility"] = {{"binding", sol.feasibility->binding}, {"detail", sol.feasibility->detail}};
  }
  return j.dump(indent);
}

LoadedSolution solution_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("solution parse error: ") + e.what());
  }
  try {
    if (j.at("schema").get<int>() != 1) throw std::runtime_error("solution: unsupported schema");
    LoadedSolution out;
    out.cfg = parse_config(j.at("config").dump());
    int n = out.cfg.N;
    DesignSolution& s = out.sol;
    s.mode = parse_mode(j.at("mode").get<std::string>());
    s.scheme = parse_benchmark(j.at("benchmark").get<std::string>());
    s.status = j.at("status").get<std::string>();
    s.W1 = matrix_from_json(j.at("W1"), n);
    s.T = matrix_from_json(j.at("T"), n);
    s.eta = j.at("eta").get<double>();
    const json& w = j.at("w1");
    if (!w.is_array() || static_cast<int>(w.size()) != 2 * n) throw std::runtime_error("solution: bad w1");
    s.w1.resize(n);
    for (int i = 0; i < n; ++i) s.w1(i) = cd(w[2 * i].get<double>(), w[2 * i + 1].get<double>());
    s.objective = j.at("objective").get<double>();
    s.rate = j.at("rate").get<double>();
    if (j.contains("covert_margin")) s.covert_margin = j["covert_margin"].get<double>();
    s.rank_ratio = j.at("rank_ratio").get<double>();
    if (j.contains("message")) s.message = j["message"].get<std::string>();
    const json& tr = j.at("trace");
    s.trace.solves = tr.at("solves").get<int>();
    s.trace.seconds = tr.at("seconds").get<double>();
    s.trace.rho_schedule = tr.at("rho_schedule").get<std::vector<double>>();
    for (const json& r : tr.at("records")) {
      IterationRecord rec;
      rec.outer = r.at("outer").get<int>();
      rec.inner = r.at("inner").get<int>();
      rec.objective = r.at("objective").get<double>();
      rec.penalty = r.at("penalty").get<double>();
      rec.rho = r.at("rho").is_null() ? std::numeric_limits<double>::infinity() : r.at("rho").get<double>();
      rec.rank_ratio = r.at("rank_ratio").get<double>();
      rec.status = r.at("status").get<std::string>();
      rec.seconds = r.at("seconds").get<double>();
      s.trace.records.push_back(rec);
    }
    return out;
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("solution schema mismatch: ") + e.what());
  }
}

}  // namespace cisac
