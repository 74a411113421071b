#include "covert_isac/linalg.hpp"
#include "covert_isac/rng.hpp"

#include <cmath>

namespace cisac {

double hermitian_defect(const CMat& H) {
  if (H.size() == 0) return 0.0;
  return (H - H.adjoint()).cwiseAbs().maxCoeff();
}

double min_eigenvalue(const CMat& H) {
  if (H.size() == 0) return 0.0;
  CMat sym = 0.5 * (H + H.adjoint());
  Eigen::SelfAdjointEigenSolver<CMat> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

CMat hermitian_sqrt(const CMat& H, double* clipped) {
  CMat sym = 0.5 * (H + H.adjoint());
  Eigen::SelfAdjointEigenSolver<CMat> es(sym);
  RVec ev = es.eigenvalues();
  double worst = 0.0;
  for (int i = 0; i < ev.size(); ++i) {
    if (ev(i) < 0.0) {
      worst = std::min(worst, ev(i));
      ev(i) = 0.0;
    }
  }
  if (clipped) *clipped = worst;
  return es.eigenvectors() * ev.cwiseSqrt().asDiagonal() * es.eigenvectors().adjoint();
}

Rng substream(std::uint64_t master, std::string_view name, std::uint64_t index) {
  // FNV-1a over the stream name, mixed with master seed and index through
  // seed_seq so nearby seeds give unrelated states.
  std::uint64_t h = 1469598103934665603ULL;
  for (char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  std::seed_seq seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
                    static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return Rng(seq);
}

CVec complex_gaussian(Rng& rng, int n, double var) {
  std::normal_distribution<double> nd(0.0, std::sqrt(var / 2.0));
  CVec v(n);
  for (int i = 0; i < n; ++i) {
    double re = nd(rng);
    double im = nd(rng);
    v(i) = cd(re, im);
  }
  return v;
}

CVec uniform_in_ball(Rng& rng, int n, double radius) {
  CVec dir = complex_gaussian(rng, n);
  double nrm = dir.norm();
  while (nrm == 0.0) {
    dir = complex_gaussian(rng, n);
    nrm = dir.norm();
  }
  std::uniform_real_distribution<double> u(0.0, 1.0);
  // C^n is R^{2n}: radius ~ U^{1/(2n)}.
  double r = radius * std::pow(u(rng), 1.0 / (2.0 * n));
  return dir * (r / nrm);
}

}  // namespace cisac
