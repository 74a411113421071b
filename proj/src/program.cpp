#include "covert_isac/program.hpp"

#include <cmath>
#include <stdexcept>

#include "covert_isac/constraints.hpp"

namespace cisac {

CMat Assignment::operator()(HermVar v) const {
  CMat H(v.n, v.n);
  int p = v.offset;
  for (int i = 0; i < v.n; ++i) H(i, i) = x_(p++);
  for (int i = 0; i < v.n; ++i)
    for (int j = i + 1; j < v.n; ++j) {
      cd z(x_(p), x_(p + 1));
      p += 2;
      H(i, j) = z;
      H(j, i) = std::conj(z);
    }
  return H;
}

ScalarVar ProgramBuilder::scalar() { return ScalarVar{nvars_++}; }

HermVar ProgramBuilder::hermitian(int n) {
  HermVar v{nvars_, n};
  nvars_ += n * n;
  return v;
}

void ProgramBuilder::minimize(ScalarFn f) { objective_ = std::move(f); }

void ProgramBuilder::nonneg(std::string tag, ScalarFn f) {
  entries_.push_back({std::move(tag), RowKind::Nonneg, std::move(f), {}, {}});
}

void ProgramBuilder::equal(std::string tag, ScalarFn f) {
  entries_.push_back({std::move(tag), RowKind::Equality, std::move(f), {}, {}});
}

void ProgramBuilder::soc(std::string tag, VectorFn f) {
  entries_.push_back({std::move(tag), RowKind::Soc, {}, std::move(f), {}});
}

void ProgramBuilder::psd(std::string tag, HermFn f) {
  entries_.push_back({std::move(tag), RowKind::Psd, {}, {}, std::move(f)});
}

namespace {

// Rows of an affine map x -> f0 + F x, obtained by probing.
struct Affine {
  RVec f0;
  RMat F;
};

template <typename Eval>
Affine probe(int n, Eval eval) {
  RVec x = RVec::Zero(n);
  Affine a;
  a.f0 = eval(x);
  a.F.resize(a.f0.size(), n);
  for (int p = 0; p < n; ++p) {
    x(p) = 1.0;
    a.F.col(p) = eval(x) - a.f0;
    x(p) = 0.0;
  }
  return a;
}

RVec as_vec(double v) { return RVec::Constant(1, v); }

}  // namespace

ProgramBuilder::Built ProgramBuilder::build() const {
  const int n = nvars_;
  Built out;
  ConeDims dims;
  std::vector<Affine> nonneg, eq, soc, psd;
  std::vector<const Entry*> nn_e, eq_e, soc_e, psd_e;
  for (const Entry& e : entries_) {
    switch (e.kind) {
      case RowKind::Nonneg:
        nonneg.push_back(probe(n, [&](const RVec& x) { return as_vec(e.s(Assignment(x))); }));
        nn_e.push_back(&e);
        break;
      case RowKind::Equality:
        eq.push_back(probe(n, [&](const RVec& x) { return as_vec(e.s(Assignment(x))); }));
        eq_e.push_back(&e);
        break;
      case RowKind::Soc:
        soc.push_back(probe(n, [&](const RVec& x) { return e.v(Assignment(x)); }));
        soc_e.push_back(&e);
        break;
      case RowKind::Psd:
        psd.push_back(probe(n, [&](const RVec& x) { return svec(embed_complex(e.h(Assignment(x)), false)); }));
        psd_e.push_back(&e);
        break;
    }
  }
  dims.l = static_cast<int>(nonneg.size());
  for (auto& a : soc) dims.q.push_back(static_cast<int>(a.f0.size()));
  for (auto& a : psd) {
    int len = static_cast<int>(a.f0.size());
    int k = static_cast<int>(std::lround((std::sqrt(8.0 * len + 1) - 1) / 2));
    dims.s.push_back(k);
  }
  const int m = dims.size();
  const int p = static_cast<int>(eq.size());
  ConicProblem& P = out.problem;
  P.dims = dims;
  P.G = RMat::Zero(m, n);
  P.h = RVec::Zero(m);
  P.A = RMat::Zero(p, n);
  P.b = RVec::Zero(p);

  auto scale_of = [](const RMat& F) {
    double mx = 0.0;
    for (int r = 0; r < F.rows(); ++r) mx = std::max(mx, F.row(r).norm());
    return mx > 0 ? 1.0 / mx : 1.0;
  };
  int row = 0;
  auto place = [&](const Affine& a, const Entry* e, RowKind kind, int logical) {
    double sc = scale_of(a.F);
    int r = static_cast<int>(a.f0.size());
    P.G.middleRows(row, r) = -sc * a.F;
    P.h.segment(row, r) = sc * a.f0;
    out.constraints.push_back({e->tag, kind, row, r, logical, sc});
    row += r;
  };
  for (size_t i = 0; i < nonneg.size(); ++i) place(nonneg[i], nn_e[i], RowKind::Nonneg, 1);
  for (size_t i = 0; i < soc.size(); ++i) place(soc[i], soc_e[i], RowKind::Soc, dims.q[i]);
  for (size_t i = 0; i < psd.size(); ++i) place(psd[i], psd_e[i], RowKind::Psd, dims.s[i] / 2);
  for (int i = 0; i < p; ++i) {
    double sc = scale_of(eq[i].F);
    P.A.row(i) = sc * eq[i].F.row(0);
    P.b(i) = -sc * eq[i].f0(0);
    out.constraints.push_back({eq_e[i]->tag, RowKind::Equality, i, 1, 1, sc});
  }
  if (!objective_) throw std::logic_error("ProgramBuilder: no objective");
  Affine obj = probe(n, [&](const RVec& x) { return as_vec(objective_(Assignment(x))); });
  P.c = obj.F.row(0).transpose();
  out.objective_offset = obj.f0(0);
  return out;
}

}  // namespace cisac
