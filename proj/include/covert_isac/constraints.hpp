#pragma once

#include <cstdint>

#include "covert_isac/linalg.hpp"

namespace cisac {

// Every builder below is affine in its matrix arguments, so the optimizer can
// hand them straight to ProgramBuilder and the audits can reuse them on
// numeric solutions.

struct CovertParams {
  double epsilon = 0.1;
  double P_A_min = 1.0;
  double P_A_max = 10.0;
  double P_A = 5.0;

  // Weight of T in S1 = W1 - eps (P_A_max - P_A_min) T / P_A.
  double t_weight() const { return epsilon * (P_A_max - P_A_min) / P_A; }
};

CMat s1_matrix(const CMat& W1, const CMat& T, const CovertParams& cp);

// [[l1 I - S1, -S1 h], [-h^H S1, -l1 eps_w^2 - h^H S1 h]] >= 0 with l1 >= 0 is
// equivalent to h'^H S1 h' <= 0 for every |h' - h| <= eps_w. The block is
// invariant (up to congruence) under h -> h/c, eps_w -> eps_w/c.
CMat s_procedure_lmi(const CMat& W1, const CMat& T, double lambda1, const CVec& h_w_hat,
                     double eps_w, const CovertParams& cp);

// Sufficient conditions for Pr(h^H S1 h <= 0) >= 1 - rho_c with h = h_hat + gamma^{1/2} e.
struct BtiTriple {
  CMat A_w;
  CVec b_w;
  double c_w = 0.0;
  double rho_c = 0.05;

  // Tr(A_w) - sqrt(2 ln(1/rho_c)) x + ln(rho_c) y + c_w   (>= 0)
  double affine(double x, double y) const;
  // (x, |A_w|_F entries, sqrt(2) b_w entries): first entry must dominate the norm of the rest
  RVec soc(double x) const;
  // y I + A_w  (>= 0)
  CMat psd(double y) const;
  // Smallest x and y for which soc and psd hold.
  double min_x() const;
  double min_y() const;
};

BtiTriple bti_constraints(const CMat& W1, const CMat& T, const CVec& h_w_hat, const CMat& gamma_w,
                          double rho_c, const CovertParams& cp);
// Uses a precomputed gamma_w^{1/2}.
BtiTriple bti_constraints_sqrt(const CMat& W1, const CMat& T, const CVec& h_w_hat,
                               const CMat& gamma_sqrt, double rho_c, const CovertParams& cp);

// Tr(Omega T)/P_A - tau_eps Tr(Omega W1)/P_A_max   (>= 0)
double statistical_covertness(const CMat& W1, const CMat& T, const CMat& Omega_w, double tau_eps,
                              const CovertParams& cp);

// eps (P_A_max - P_A_min) Tr(Omega T)/P_A - Tr(Omega W1)  (>= 0); covert power
// bound when Willie knows his channel.
double instantaneous_covertness(const CMat& W1, const CMat& T, const CMat& Omega_w,
                                const CovertParams& cp);

// h^H W1 h - (2^R_min - 1)(h^H T h + sigma_b2)   (>= 0)
double covert_rate_constraint(const CMat& W1, const CMat& T, const CVec& h_b, double R_min,
                              double sigma_b2);
// log2(1 + h^H W1 h / (h^H T h + sigma_b2))
double covert_rate(const CMat& W1, const CMat& T, const CVec& h_b, double sigma_b2);

// P_t - P_A_max - Tr(W1)   (>= 0)
double power_constraint(const CMat& W1, double P_t, double P_A_max);
// Tr(T) - P_A   (== 0)
double dfan_power_constraint(const CMat& T, double P_A);

// Tr(W1) - w^H W1 w for the normalized w. Throws std::invalid_argument for w = 0.
double dc_penalty(const CMat& W1, const CVec& w_l);

// [[Re H, -Im H], [Im H, Re H]]. Throws std::invalid_argument when H is not
// Hermitian within 1e-10 relative (unless check is false).
RMat embed_complex(const CMat& H, bool check = true);
// Inverse of embed_complex, averaging the redundant blocks.
CMat lift_real(const RMat& R);

// ---------------------------------------------------------------------------
// Sampling verifiers. Violations are measured on h^H S1 h / |h_hat|^2 so the
// tolerance does not depend on the path-loss scale.

struct ViolationCount {
  long violations = 0;
  long samples = 0;
  double worst = 0.0;  // largest normalized h^H S1 h seen
  double rate() const { return samples ? static_cast<double>(violations) / samples : 0.0; }
};

// h = h_hat + uniform draw from the eps_w ball.
ViolationCount sample_bounded_violations(const CMat& W1, const CMat& T, const CVec& h_w_hat,
                                         double eps_w, const CovertParams& cp, long samples,
                                         std::uint64_t seed, double tol = 1e-8);
// h = h_hat + gamma^{1/2} e, e ~ CN(0, I); counts h^H S1 h > 0.
ViolationCount sample_gaussian_outage(const CMat& W1, const CMat& T, const CVec& h_w_hat,
                                      const CMat& gamma_w, const CovertParams& cp, long samples,
                                      std::uint64_t seed);

}  // namespace cisac
