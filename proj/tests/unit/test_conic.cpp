#include <random>

#include "covert_isac/conic.hpp"
#include "doctest.h"

using namespace cisac;

namespace {

RMat mat(int r, int c, std::initializer_list<double> v) {
  RMat M(r, c);
  auto it = v.begin();
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) M(i, j) = *it++;
  return M;
}

RVec vec(std::initializer_list<double> v) {
  RVec x(v.size());
  int i = 0;
  for (double d : v) x(i++) = d;
  return x;
}

}  // namespace

TEST_CASE("svec/smat round trip preserves inner products") {
  RMat X = mat(3, 3, {1, 2, 3, 2, 5, 6, 3, 6, 9});
  RMat Y = mat(3, 3, {2, -1, 0, -1, 4, 1, 0, 1, 3});
  CHECK(svec(X).dot(svec(Y)) == doctest::Approx((X.cwiseProduct(Y)).sum()));
  CHECK((smat(svec(X), 3) - X).norm() < 1e-14);
}

TEST_CASE("LP with known vertex solution") {
  // min -x - y  s.t. x + 2y <= 4, 3x + y <= 6, x,y >= 0  -> (8/5, 6/5), -14/5
  ConicProblem P;
  P.c = vec({-1, -1});
  P.G = mat(4, 2, {1, 2, 3, 1, -1, 0, 0, -1});
  P.h = vec({4, 6, 0, 0});
  P.dims.l = 4;
  P.A = RMat(0, 2);
  P.b = RVec(0);
  auto s = solve_conic(P);
  REQUIRE(s.status == ConicStatus::Optimal);
  CHECK(s.x(0) == doctest::Approx(1.6).epsilon(1e-7));
  CHECK(s.x(1) == doctest::Approx(1.2).epsilon(1e-7));
  CHECK(s.pcost == doctest::Approx(-2.8).epsilon(1e-8));
}

TEST_CASE("SOCP: minimize x + y over the unit disc") {
  ConicProblem P;
  P.c = vec({1, 1});
  P.G = mat(3, 2, {0, 0, -1, 0, 0, -1});
  P.h = vec({1, 0, 0});
  P.dims.q = {3};
  auto s = solve_conic(P);
  REQUIRE(s.status == ConicStatus::Optimal);
  CHECK(s.pcost == doctest::Approx(-std::sqrt(2.0)).epsilon(1e-8));
  CHECK(s.x(0) == doctest::Approx(-1 / std::sqrt(2.0)).epsilon(1e-7));
}

TEST_CASE("SDP: min <C,X> with unit trace equals the smallest eigenvalue") {
  RMat C = mat(3, 3, {2, 1, 0, 1, 3, -1, 0, -1, 1});
  // x = lower triangle of X by columns: (x00, x10, x20, x11, x21, x22)
  const double r2 = std::sqrt(2.0);
  ConicProblem P;
  P.c = vec({C(0, 0), 2 * C(1, 0), 2 * C(2, 0), C(1, 1), 2 * C(2, 1), C(2, 2)});
  P.G = -RVec(vec({1, r2, r2, 1, r2, 1})).asDiagonal().toDenseMatrix();
  P.h = RVec::Zero(6);
  P.A = mat(1, 6, {1, 0, 0, 1, 0, 1});
  P.b = vec({1});
  P.dims.s = {3};
  auto s = solve_conic(P);
  REQUIRE(s.status == ConicStatus::Optimal);
  Eigen::SelfAdjointEigenSolver<RMat> es(C);
  CHECK(s.pcost == doctest::Approx(es.eigenvalues()(0)).epsilon(1e-8));
  CHECK(s.pres <= 1e-7);
  CHECK(s.dres <= 1e-7);
}

TEST_CASE("contradictory bounds are reported infeasible") {
  ConicProblem P;
  P.c = vec({1});
  P.G = mat(2, 1, {-1, 1});
  P.h = vec({-1, 0});  // x >= 1 and x <= 0
  P.dims.l = 2;
  auto s = solve_conic(P);
  CHECK(s.status == ConicStatus::PrimalInfeasible);
}

TEST_CASE("unbounded objective is reported") {
  ConicProblem P;
  P.c = vec({-1});
  P.G = mat(1, 1, {-1});
  P.h = vec({0});
  P.dims.l = 1;
  auto s = solve_conic(P);
  CHECK(s.status == ConicStatus::DualInfeasible);
}

TEST_CASE("random mixed-cone problems satisfy the optimality certificate") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 20; ++trial) {
    ConeDims d;
    d.l = 3;
    d.q = {4, 3};
    d.s = {3, 2};
    int m = d.size(), n = 6;
    ConicProblem P;
    P.dims = d;
    P.G = RMat(m, n);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) P.G(i, j) = g(rng);
    // Strictly feasible primal (s0 = e) and dual (z0 = e) guarantee an optimum.
    RVec e = RVec::Zero(m);
    e.head(3).setOnes();
    e(3) = 1;
    e(7) = 1;
    const int so = 10;
    e(so) = 1, e(so + 3) = 1, e(so + 5) = 1;
    e(so + 6) = 1, e(so + 8) = 1;
    RVec x0(n);
    for (int j = 0; j < n; ++j) x0(j) = g(rng);
    P.h = P.G * x0 + e;
    P.c = -P.G.transpose() * e;
    P.A = RMat(0, n);
    P.b = RVec(0);
    auto s = solve_conic(P);
    REQUIRE(s.status == ConicStatus::Optimal);
    CHECK(cone_violation(s.s, d) <= 1e-9);
    CHECK(cone_violation(s.z, d) <= 1e-9);
    CHECK(std::abs(s.pcost - s.dcost) <= 1e-7 * std::max(1.0, std::abs(s.pcost)));
    CHECK(s.pres <= 1e-7);
    CHECK(s.dres <= 1e-7);
  }
}
