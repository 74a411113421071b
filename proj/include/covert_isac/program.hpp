#pragma once

#include <functional>
#include <string>
#include <vector>

#include "covert_isac/conic.hpp"
#include "covert_isac/linalg.hpp"

namespace cisac {

// Builds a real conic program over scalar and complex Hermitian variables.
// Constraints are supplied as affine functions of the variable values; their
// coefficients are recovered by evaluating each function at the origin and at
// every unit vector, so the same numeric builders serve both the optimizer
// and post-solve audits.

struct ScalarVar {
  int index = -1;
};

// n*n real parameters: the diagonal, then (Re, Im) of each entry (i, j), i < j.
struct HermVar {
  int offset = -1;
  int n = 0;
};

class Assignment {
 public:
  explicit Assignment(const RVec& x) : x_(x) {}
  double operator()(ScalarVar v) const { return x_(v.index); }
  CMat operator()(HermVar v) const;

 private:
  const RVec& x_;
};

enum class RowKind { Nonneg, Equality, Soc, Psd };

struct ConstraintInfo {
  std::string tag;
  RowKind kind;
  int first_row = 0;  // within G (cones) or A (equalities)
  int rows = 0;
  int logical_size = 0;  // SOC length or Hermitian order
  double scale = 1.0;    // row scaling applied during equilibration
};

using ScalarFn = std::function<double(const Assignment&)>;
using VectorFn = std::function<RVec(const Assignment&)>;
using HermFn = std::function<CMat(const Assignment&)>;

class ProgramBuilder {
 public:
  ScalarVar scalar();
  HermVar hermitian(int n);
  int num_vars() const { return nvars_; }

  void minimize(ScalarFn f);
  void nonneg(std::string tag, ScalarFn f);  // f >= 0
  void equal(std::string tag, ScalarFn f);   // f == 0
  void soc(std::string tag, VectorFn f);     // f0 >= |f1..|
  void psd(std::string tag, HermFn f);       // Hermitian f >= 0 (real embedding of order 2n)

  struct Built {
    ConicProblem problem;
    std::vector<ConstraintInfo> constraints;
    double objective_offset = 0.0;
  };
  Built build() const;

 private:
  struct Entry {
    std::string tag;
    RowKind kind;
    ScalarFn s;
    VectorFn v;
    HermFn h;
  };
  int nvars_ = 0;
  std::vector<Entry> entries_;
  ScalarFn objective_;
};

}  // namespace cisac
