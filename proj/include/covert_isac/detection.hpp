#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include "covert_isac/beampattern.hpp"
#include "covert_isac/scenario.hpp"

namespace cisac {

struct BoundedDepInputs {
  double rho1 = 1.0;  // |h_w^H x_A|^2 per unit P_A
  double rho2 = 0.0;  // |h_w^H w1|^2
  double sigma_w2 = 0.0;
  double P_A_min = 1.0;
  double P_A_max = 10.0;

  double delta1() const { return P_A_max * rho1 + sigma_w2; }
  double delta2() const { return rho2 + sigma_w2; }
  double delta3() const { return P_A_max * rho1 + rho2 + sigma_w2; }
};

struct StatisticalDepParams {
  double t_A = 1.0;        // realization of |h_w^H x_A|^2 (conditional forms)
  double lambda_w1 = 1.0;  // mean of t_w1
  double lambda_A = 1.0;   // mean of t_A
  double P_A_min = 1.0;
  double P_A_max = 10.0;
  double sigma_w2 = 0.0;

  double spread() const { return P_A_max - P_A_min; }
  double pi_ratio() const { return P_A_max / P_A_min; }
  double tau() const { return lambda_A * P_A_max / lambda_w1; }
  double nu() const { return lambda_w1 / (spread() * lambda_A); }
  double mu() const { return lambda_w1 / (P_A_max * lambda_A + lambda_w1); }
  double p_alpha() const { return spread() * t_A; }
  double p_beta() const { return P_A_min / spread(); }
  double delta_A() const { return P_A_max * t_A + sigma_w2; }
};

struct CurvePoint {
  double gamma, pfa, pmd, xi;
};

struct DetectionResult {
  double gamma_star = 0.0;
  double xi_star = 1.0;
  bool covert_feasible = true;
  std::vector<CurvePoint> curves;
};

// Bounded / perfect knowledge of (rho1, rho2) at Willie, P_A ~ U[P_A_min, P_A_max].
double pfa_bounded(const BoundedDepInputs& in, double gamma);
double pmd_bounded(const BoundedDepInputs& in, double gamma);
DetectionResult min_dep_bounded(const BoundedDepInputs& in);

// Statistical WCSI, conditional on t_A, with t_w1 ~ Exp(lambda_w1).
double pfa_statistical(const StatisticalDepParams& p, double gamma);
// Exact Pr(P_A t_A + t_w1 + sigma^2 < gamma).
double pmd_statistical(const StatisticalDepParams& p, double gamma);
// The simplified middle branch integrates the unclamped uniform CDF over
// [0, gamma - sigma^2]; kept for comparison, clamped to [0,1]. It is never
// above pmd_statistical and agrees with it for gamma >= Delta_A.
double pmd_statistical_literal(const StatisticalDepParams& p, double gamma);

// Gamma* = Delta_A; xi* is the exact minimum 1 - lambda(1 - e^{-(Pmax-Pmin)t_A/lambda})/p_alpha.
DetectionResult min_dep_statistical_conditional(const StatisticalDepParams& p);
// Simplified value 1 + lambda(e^{-Pmax t_A/lambda} - 1)/p_alpha + p_beta e^{-Pmax t_A/lambda},
// i.e. the literal middle branch evaluated at Delta_A.
double xi_star_statistical_literal(const StatisticalDepParams& p);

// 1 + nu ln(mu) + p_beta mu. Lower bound on the exact average below.
double avg_min_dep_statistical(const StatisticalDepParams& p);
// E over t_A ~ Exp(lambda_A) of the exact conditional minimum: 1 - nu ln(1 + (Pmax-Pmin)lambda_A/lambda_w1).
double avg_min_dep_statistical_exact(const StatisticalDepParams& p);

struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

// tau-parametrized average minimum DEP; tau > 0, pi > 1.
double avg_dep_tau(double tau, double pi_ratio);
// Total extension with the tau -> 0 limit value 0.
double avg_dep_tau_total(double tau, double pi_ratio);
// f(tau) = 1 - avg_dep_tau.
double dep_f(double tau, double pi_ratio);
// Closed-form derivative d avg_dep_tau / d tau.
double avg_dep_tau_derivative(double tau, double pi_ratio);
// Root of f(tau) = epsilon. Throws DomainError outside (0,1) or past the expansion cap.
double solve_tau_epsilon(double epsilon, double pi_ratio);

struct InstantaneousDep {
  double xi_bar = 1.0;
  bool covert_feasible = true;
};
// 1 - P_b/(Pmax - Pmin), clamped at 0 with covert_feasible = false beyond the range.
InstantaneousDep avg_min_dep_instantaneous(double P_b, double P_A_min, double P_A_max);
// Average of the clamped minimum DEP max(0, 1 - rho2/((Pmax-Pmin) rho1)) with rho2/rho1 ~ Exp(mean P_b).
double avg_min_dep_instantaneous_exact(double P_b, double P_A_min, double P_A_max);
// Covertness bound P_b <= eps (Pmax - Pmin).
double instantaneous_power_bound(double epsilon, double P_A_min, double P_A_max);

struct GridSearchResult {
  double gamma;
  double xi;
};
// argmin over a uniform grid including both end points; ties go to the smallest gamma.
GridSearchResult grid_search_gamma(const std::function<double(double)>& xi_fn, double lo, double hi,
                                   int points);

// Sampled (gamma, P_FA, P_MD, xi) table.
std::vector<CurvePoint> sample_curves(const std::function<double(double)>& pfa,
                                      const std::function<double(double)>& pmd, double lo,
                                      double hi, int points);

// ---------------------------------------------------------------------------
// Monte Carlo

struct McEstimate {
  double pfa = 0.0, pmd = 0.0, xi = 0.0;
  double hw_pfa = 0.0, hw_pmd = 0.0, hw_xi = 0.0;  // 95% half-widths
  long n = 0;
};

// Sample count per partition is split over a fixed number of chunks so the
// result does not depend on the worker count.
constexpr int kMcChunks = 16;

// Worker count from COVERT_ISAC_THREADS (default: hardware concurrency).
int worker_threads();

// Fixed-threshold simulation of the bounded model (P_A uniform).
McEstimate mc_bounded(const BoundedDepInputs& in, double gamma, long n, std::uint64_t seed);
// Conditional statistical model: P_A uniform, t_w1 ~ Exp(lambda_w1), fixed t_A and gamma.
McEstimate mc_statistical(const StatisticalDepParams& p, double gamma, long n, std::uint64_t seed);
// t_A ~ Exp(lambda_A), adaptive threshold Delta_A(t_A).
McEstimate mc_avg_statistical(const StatisticalDepParams& p, long n, std::uint64_t seed);
// rho2 ~ Exp(P_b rho1), Willie applies the bounded-case Gamma* for each draw.
McEstimate mc_instantaneous(double P_b, double rho1, double P_A_min, double P_A_max,
                            double sigma_w2, long n, std::uint64_t seed);

struct Detector {
  bool adaptive = true;  // per-realization Gamma*; otherwise `gamma`
  double gamma = 0.0;
};

// Simulates Willie's radiometer against a design. Channel errors follow the
// WCSI mode, P_A is uniform and the infinite-blocklength statistic uses the
// quadratic forms of T/P_A and W1.
McEstimate monte_carlo_dep(const SystemConfig& cfg, const ChannelSet& ch, WcsiMode mode,
                           const CMat& W1, const CMat& T, const Detector& det, long n,
                           std::uint64_t seed);

}  // namespace cisac
