#include "covert_isac/constraints.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "covert_isac/rng.hpp"

namespace cisac {

CMat s1_matrix(const CMat& W1, const CMat& T, const CovertParams& cp) {
  if (W1.rows() != T.rows() || W1.cols() != T.cols())
    throw std::invalid_argument("s1_matrix: dimension mismatch");
  return W1 - cp.t_weight() * T;
}

CMat s_procedure_lmi(const CMat& W1, const CMat& T, double lambda1, const CVec& h_w_hat,
                     double eps_w, const CovertParams& cp) {
  const int N = static_cast<int>(W1.rows());
  if (h_w_hat.size() != N) throw std::invalid_argument("s_procedure_lmi: dimension mismatch");
  CMat S1 = s1_matrix(W1, T, cp);
  CVec Sh = S1 * h_w_hat;
  CMat B(N + 1, N + 1);
  B.topLeftCorner(N, N) = lambda1 * CMat::Identity(N, N) - S1;
  B.topRightCorner(N, 1) = -Sh;
  B.bottomLeftCorner(1, N) = -Sh.adjoint();
  B(N, N) = -lambda1 * eps_w * eps_w - h_w_hat.dot(Sh).real();
  return B;
}

double BtiTriple::affine(double x, double y) const {
  return A_w.trace().real() - std::sqrt(2.0 * std::log(1.0 / rho_c)) * x + std::log(rho_c) * y +
         c_w;
}

RVec BtiTriple::soc(double x) const {
  const int N = static_cast<int>(A_w.rows());
  RVec v(1 + N * N + 2 * N);
  const double r2 = std::sqrt(2.0);
  int p = 0;
  v(p++) = x;
  for (int i = 0; i < N; ++i) v(p++) = A_w(i, i).real();
  for (int i = 0; i < N; ++i)
    for (int j = i + 1; j < N; ++j) {
      v(p++) = r2 * A_w(i, j).real();
      v(p++) = r2 * A_w(i, j).imag();
    }
  for (int i = 0; i < N; ++i) {
    v(p++) = r2 * b_w(i).real();
    v(p++) = r2 * b_w(i).imag();
  }
  return v;
}

CMat BtiTriple::psd(double y) const {
  return y * CMat::Identity(A_w.rows(), A_w.cols()) + A_w;
}

double BtiTriple::min_x() const { return soc(0.0).tail(soc(0.0).size() - 1).norm(); }

double BtiTriple::min_y() const { return std::max(0.0, -min_eigenvalue(A_w)); }

BtiTriple bti_constraints_sqrt(const CMat& W1, const CMat& T, const CVec& h_w_hat,
                               const CMat& gamma_sqrt, double rho_c, const CovertParams& cp) {
  if (!(rho_c > 0.0 && rho_c < 1.0)) throw std::invalid_argument("bti_constraints: rho_c outside (0,1)");
  if (h_w_hat.size() != W1.rows() || gamma_sqrt.rows() != W1.rows())
    throw std::invalid_argument("bti_constraints: dimension mismatch");
  CMat negS = -s1_matrix(W1, T, cp);
  BtiTriple t;
  t.A_w = gamma_sqrt * negS * gamma_sqrt;
  t.A_w = 0.5 * (t.A_w + t.A_w.adjoint());
  t.b_w = gamma_sqrt * negS * h_w_hat;
  t.c_w = h_w_hat.dot(negS * h_w_hat).real();
  t.rho_c = rho_c;
  return t;
}

BtiTriple bti_constraints(const CMat& W1, const CMat& T, const CVec& h_w_hat, const CMat& gamma_w,
                          double rho_c, const CovertParams& cp) {
  return bti_constraints_sqrt(W1, T, h_w_hat, hermitian_sqrt(gamma_w), rho_c, cp);
}

double statistical_covertness(const CMat& W1, const CMat& T, const CMat& Omega_w, double tau_eps,
                              const CovertParams& cp) {
  return (Omega_w * T).trace().real() / cp.P_A - tau_eps * (Omega_w * W1).trace().real() / cp.P_A_max;
}

double instantaneous_covertness(const CMat& W1, const CMat& T, const CMat& Omega_w,
                                const CovertParams& cp) {
  return cp.t_weight() * (Omega_w * T).trace().real() - (Omega_w * W1).trace().real();
}

double covert_rate_constraint(const CMat& W1, const CMat& T, const CVec& h_b, double R_min,
                              double sigma_b2) {
  double g = std::exp2(R_min) - 1.0;
  return quad_form(W1, h_b) - g * (quad_form(T, h_b) + sigma_b2);
}

double covert_rate(const CMat& W1, const CMat& T, const CVec& h_b, double sigma_b2) {
  return std::log2(1.0 + quad_form(W1, h_b) / (quad_form(T, h_b) + sigma_b2));
}

double power_constraint(const CMat& W1, double P_t, double P_A_max) {
  return P_t - P_A_max - W1.trace().real();
}

double dfan_power_constraint(const CMat& T, double P_A) { return T.trace().real() - P_A; }

double dc_penalty(const CMat& W1, const CVec& w_l) {
  double nrm = w_l.norm();
  if (nrm == 0.0) throw std::invalid_argument("dc_penalty: zero direction");
  return W1.trace().real() - quad_form(W1, w_l) / (nrm * nrm);
}

RMat embed_complex(const CMat& H, bool check) {
  const int n = static_cast<int>(H.rows());
  if (H.cols() != n) throw std::invalid_argument("embed_complex: not square");
  if (check) {
    double scale = std::max(1.0, H.cwiseAbs().maxCoeff());
    if (hermitian_defect(H) > 1e-10 * scale) throw std::invalid_argument("embed_complex: not Hermitian");
  }
  RMat R(2 * n, 2 * n);
  R.topLeftCorner(n, n) = H.real();
  R.topRightCorner(n, n) = -H.imag();
  R.bottomLeftCorner(n, n) = H.imag();
  R.bottomRightCorner(n, n) = H.real();
  return R;
}

CMat lift_real(const RMat& R) {
  if (R.rows() != R.cols() || R.rows() % 2 != 0) throw std::invalid_argument("lift_real: bad shape");
  const int n = static_cast<int>(R.rows() / 2);
  RMat re = 0.5 * (R.topLeftCorner(n, n) + R.bottomRightCorner(n, n));
  RMat im = 0.5 * (R.bottomLeftCorner(n, n) - R.topRightCorner(n, n));
  CMat H(n, n);
  H.real() = re;
  H.imag() = im;
  return H;
}

ViolationCount sample_bounded_violations(const CMat& W1, const CMat& T, const CVec& h_w_hat,
                                         double eps_w, const CovertParams& cp, long samples,
                                         std::uint64_t seed, double tol) {
  CMat S1 = s1_matrix(W1, T, cp);
  double norm2 = std::max(h_w_hat.squaredNorm(), 1e-300);
  Rng rng = substream(seed, "verify-bounded");
  ViolationCount vc;
  vc.worst = -std::numeric_limits<double>::infinity();
  const int N = static_cast<int>(h_w_hat.size());
  for (long i = 0; i < samples; ++i) {
    CVec h = h_w_hat + uniform_in_ball(rng, N, eps_w);
    double v = quad_form(S1, h) / norm2;
    vc.worst = std::max(vc.worst, v);
    if (v > tol) ++vc.violations;
  }
  vc.samples = samples;
  return vc;
}

ViolationCount sample_gaussian_outage(const CMat& W1, const CMat& T, const CVec& h_w_hat,
                                      const CMat& gamma_w, const CovertParams& cp, long samples,
                                      std::uint64_t seed) {
  CMat S1 = s1_matrix(W1, T, cp);
  CMat g = hermitian_sqrt(gamma_w);
  double norm2 = std::max(h_w_hat.squaredNorm(), 1e-300);
  Rng rng = substream(seed, "verify-gaussian");
  ViolationCount vc;
  vc.worst = -std::numeric_limits<double>::infinity();
  const int N = static_cast<int>(h_w_hat.size());
  for (long i = 0; i < samples; ++i) {
    CVec h = h_w_hat + g * complex_gaussian(rng, N);
    double v = quad_form(S1, h) / norm2;
    vc.worst = std::max(vc.worst, v);
    if (v > 0.0) ++vc.violations;
  }
  vc.samples = samples;
  return vc;
}

}  // namespace cisac
