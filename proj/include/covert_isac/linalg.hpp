#pragma once

#include <complex>
#include <Eigen/Dense>

namespace cisac {

using cd = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;

constexpr double kPi = 3.14159265358979323846;

inline double deg2rad(double d) { return d * kPi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / kPi; }

// Largest |H - H^H| entry.
double hermitian_defect(const CMat& H);

// Smallest eigenvalue of the Hermitian part of H.
double min_eigenvalue(const CMat& H);

// Hermitian square root with eigenvalues floored at zero. Reports the most
// negative eigenvalue that was clipped through `clipped` when non-null.
CMat hermitian_sqrt(const CMat& H, double* clipped = nullptr);

// Real quadratic form v^H H v of a Hermitian matrix.
inline double quad_form(const CMat& H, const CVec& v) {
  return (v.adjoint() * H * v)(0, 0).real();
}

}  // namespace cisac
