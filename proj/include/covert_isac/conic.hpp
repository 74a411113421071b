#pragma once

#include <string>
#include <vector>

#include "covert_isac/linalg.hpp"

namespace cisac {

// Cone product: l nonnegative entries, then second-order cones of the given
// sizes (t, x) with t >= |x|, then real symmetric PSD blocks of the given
// orders stored as svec (lower triangle by columns, off-diagonals times sqrt 2).
struct ConeDims {
  int l = 0;
  std::vector<int> q;
  std::vector<int> s;

  int size() const;
  int degree() const;
};

// minimize c'x  s.t.  G x + s = h,  A x = b,  s in K.
struct ConicProblem {
  RVec c;
  RMat G;
  RVec h;
  RMat A;
  RVec b;
  ConeDims dims;
};

enum class ConicStatus { Optimal, PrimalInfeasible, DualInfeasible, NumericalFailure, MaxIterations, Timeout };

std::string to_string(ConicStatus s);

struct ConicOptions {
  double feastol = 1e-9;
  double abstol = 1e-9;
  double reltol = 1e-9;
  double inftol = 1e-7;  // infeasibility certificates
  int max_iter = 120;
  double timeout_s = 0.0;  // <= 0: none
  bool verbose = false;
};

struct ConicSolution {
  ConicStatus status = ConicStatus::NumericalFailure;
  RVec x, y, z, s;
  double pcost = 0.0, dcost = 0.0;
  double gap = 0.0, relgap = 0.0;
  double pres = 0.0, dres = 0.0;  // absolute infinity-norm residuals
  int iterations = 0;
  double seconds = 0.0;
};

ConicSolution solve_conic(const ConicProblem& prob, const ConicOptions& opt = {});

// svec / smat for one symmetric block.
RVec svec(const RMat& X);
RMat smat(const RVec& v, int k);

// Largest violation of cone membership (0 when inside): the most negative
// "eigenvalue" over all cones, sign flipped.
double cone_violation(const RVec& s, const ConeDims& dims);

}  // namespace cisac
