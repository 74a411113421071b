#include "covert_isac/conic.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>

namespace cisac {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
const double kSqrt2 = std::sqrt(2.0);

int svec_len(int k) { return k * (k + 1) / 2; }

struct Layout {
  ConeDims dims;
  std::vector<int> q_off, s_off;
  int m = 0;

  explicit Layout(const ConeDims& d) : dims(d) {
    int o = d.l;
    for (int q : d.q) {
      q_off.push_back(o);
      o += q;
    }
    for (int k : d.s) {
      s_off.push_back(o);
      o += svec_len(k);
    }
    m = o;
  }
};

// ---------------------------------------------------------------------------
// Jordan algebra helpers

RVec identity(const Layout& L) {
  RVec e = RVec::Zero(L.m);
  e.head(L.dims.l).setOnes();
  for (int off : L.q_off) e(off) = 1.0;
  for (size_t b = 0; b < L.dims.s.size(); ++b) {
    int k = L.dims.s[b];
    int p = L.s_off[b];
    for (int j = 0; j < k; ++j) {
      e(p) = 1.0;
      p += k - j;
    }
  }
  return e;
}

RVec jprod(const Layout& L, const RVec& x, const RVec& y) {
  RVec r(L.m);
  int l = L.dims.l;
  r.head(l) = x.head(l).cwiseProduct(y.head(l));
  for (size_t i = 0; i < L.dims.q.size(); ++i) {
    int o = L.q_off[i], q = L.dims.q[i];
    r(o) = x.segment(o, q).dot(y.segment(o, q));
    r.segment(o + 1, q - 1) = x(o) * y.segment(o + 1, q - 1) + y(o) * x.segment(o + 1, q - 1);
  }
  for (size_t b = 0; b < L.dims.s.size(); ++b) {
    int k = L.dims.s[b], o = L.s_off[b];
    RMat X = smat(x.segment(o, svec_len(k)), k), Y = smat(y.segment(o, svec_len(k)), k);
    RMat P = 0.5 * (X * Y + Y * X);
    r.segment(o, svec_len(k)) = svec(P);
  }
  return r;
}

struct Scaling {
  RVec d;
  std::vector<double> beta;
  std::vector<RVec> v;
  std::vector<RMat> r, rinv;
  std::vector<RVec> lam_psd;
  RVec lambda;
};

// u -> lambda \ u (inverse of the Jordan product with lambda).
RVec jdiv(const Layout& L, const Scaling& W, const RVec& u) {
  RVec r(L.m);
  int l = L.dims.l;
  const RVec& lam = W.lambda;
  r.head(l) = u.head(l).cwiseQuotient(lam.head(l));
  for (size_t i = 0; i < L.dims.q.size(); ++i) {
    int o = L.q_off[i], q = L.dims.q[i];
    double l0 = lam(o);
    auto l1 = lam.segment(o + 1, q - 1);
    double det = l0 * l0 - l1.squaredNorm();
    double u0 = (l0 * u(o) - l1.dot(u.segment(o + 1, q - 1))) / det;
    r(o) = u0;
    r.segment(o + 1, q - 1) = (u.segment(o + 1, q - 1) - u0 * l1) / l0;
  }
  for (size_t b = 0; b < L.dims.s.size(); ++b) {
    int k = L.dims.s[b], o = L.s_off[b];
    const RVec& lp = W.lam_psd[b];
    int p = o;
    for (int j = 0; j < k; ++j)
      for (int i = j; i < k; ++i) r(p) = 2.0 * u(p) / (lp(i) + lp(j)), ++p;
  }
  return r;
}

RVec soc_J(const RVec& v) {
  RVec r = -v;
  r(0) = v(0);
  return r;
}

double soc_Jdot(const RVec& a, const RVec& b) {
  return a(0) * b(0) - a.tail(a.size() - 1).dot(b.tail(b.size() - 1));
}

std::optional<Scaling> compute_scaling(const Layout& L, const RVec& s, const RVec& z) {
  Scaling W;
  int l = L.dims.l;
  W.lambda.resize(L.m);
  if ((s.head(l).array() <= 0).any() || (z.head(l).array() <= 0).any()) return std::nullopt;
  W.d = (s.head(l).cwiseQuotient(z.head(l))).cwiseSqrt();
  W.lambda.head(l) = (s.head(l).cwiseProduct(z.head(l))).cwiseSqrt();
  for (size_t i = 0; i < L.dims.q.size(); ++i) {
    int o = L.q_off[i], q = L.dims.q[i];
    RVec sv = s.segment(o, q), zv = z.segment(o, q);
    double sJ = soc_Jdot(sv, sv), zJ = soc_Jdot(zv, zv);
    if (!(sJ > 0) || !(zJ > 0) || sv(0) <= 0 || zv(0) <= 0) return std::nullopt;
    double sn = std::sqrt(sJ), zn = std::sqrt(zJ);
    RVec sb = sv / sn, zb = zv / zn;
    double gamma = std::sqrt(0.5 * (1.0 + sb.dot(zb)));
    RVec wb = (sb + soc_J(zb)) / (2.0 * gamma);
    double beta = std::sqrt(sn / zn);
    RVec vv = wb;
    vv(0) += 1.0;
    vv /= std::sqrt(2.0 * (wb(0) + 1.0));
    W.beta.push_back(beta);
    W.v.push_back(vv);
    // lambda = W z
    W.lambda.segment(o, q) = beta * (2.0 * vv * vv.dot(zv) - soc_J(zv));
  }
  for (size_t b = 0; b < L.dims.s.size(); ++b) {
    int k = L.dims.s[b], o = L.s_off[b];
    RMat S = smat(s.segment(o, svec_len(k)), k), Z = smat(z.segment(o, svec_len(k)), k);
    Eigen::LLT<RMat> cs(S), cz(Z);
    if (cs.info() != Eigen::Success || cz.info() != Eigen::Success) return std::nullopt;
    RMat Ls = cs.matrixL(), Lz = cz.matrixL();
    Eigen::JacobiSVD<RMat> svd(Lz.transpose() * Ls, Eigen::ComputeFullU | Eigen::ComputeFullV);
    RVec sig = svd.singularValues();
    if ((sig.array() <= 0).any()) return std::nullopt;
    RMat V = svd.matrixV();
    RMat r = Ls * V * sig.cwiseInverse().cwiseSqrt().asDiagonal();
    // r^{-1} = diag(sqrt(sig)) V' Ls^{-1}
    RMat LsInv = Ls.triangularView<Eigen::Lower>().solve(RMat::Identity(k, k));
    RMat rinv = sig.cwiseSqrt().asDiagonal() * V.transpose() * LsInv;
    W.r.push_back(r);
    W.rinv.push_back(rinv);
    W.lam_psd.push_back(sig);
    RMat Lam = sig.asDiagonal();
    W.lambda.segment(o, svec_len(k)) = svec(Lam);
  }
  return W;
}

enum class Op { W, WT, Winv, WinvT };

void apply_scaling(const Layout& L, const Scaling& W, Op op, Eigen::Ref<RVec> u) {
  int l = L.dims.l;
  if (op == Op::W || op == Op::WT)
    u.head(l) = u.head(l).cwiseProduct(W.d);
  else
    u.head(l) = u.head(l).cwiseQuotient(W.d);
  for (size_t i = 0; i < L.dims.q.size(); ++i) {
    int o = L.q_off[i], q = L.dims.q[i];
    RVec x = u.segment(o, q);
    const RVec& v = W.v[i];
    if (op == Op::W || op == Op::WT) {
      u.segment(o, q) = W.beta[i] * (2.0 * v * v.dot(x) - soc_J(x));
    } else {
      RVec Jv = soc_J(v);
      u.segment(o, q) = (2.0 * Jv * Jv.dot(x) - soc_J(x)) / W.beta[i];
    }
  }
  for (size_t b = 0; b < L.dims.s.size(); ++b) {
    int k = L.dims.s[b], o = L.s_off[b];
    RMat U = smat(u.segment(o, svec_len(k)), k);
    RMat R;
    switch (op) {
      case Op::W: R = W.r[b].transpose() * U * W.r[b]; break;
      case Op::WT: R = W.r[b] * U * W.r[b].transpose(); break;
      case Op::Winv: R = W.rinv[b].transpose() * U * W.rinv[b]; break;
      case Op::WinvT: R = W.rinv[b] * U * W.rinv[b].transpose(); break;
    }
    u.segment(o, svec_len(k)) = svec(R);
  }
}

// W^{-T} applied to every column of G, skipping columns that vanish on a block.
RMat scale_columns(const Layout& L, const Scaling& W, const RMat& G) {
  RMat out = G;
  int n = static_cast<int>(G.cols());
  int l = L.dims.l;
  for (int j = 0; j < n; ++j) out.col(j).head(l) = G.col(j).head(l).cwiseQuotient(W.d);
  for (size_t i = 0; i < L.dims.q.size(); ++i) {
    int o = L.q_off[i], q = L.dims.q[i];
    RVec Jv = soc_J(W.v[i]);
    for (int j = 0; j < n; ++j) {
      auto x = G.col(j).segment(o, q);
      if (x.squaredNorm() == 0.0) continue;
      RVec Jx = soc_J(x);
      out.col(j).segment(o, q) = (2.0 * Jv * Jv.dot(x) - Jx) / W.beta[i];
    }
  }
  for (size_t b = 0; b < L.dims.s.size(); ++b) {
    int k = L.dims.s[b], o = L.s_off[b], len = svec_len(k);
    const RMat& ri = W.rinv[b];
    for (int j = 0; j < n; ++j) {
      auto x = G.col(j).segment(o, len);
      if (x.squaredNorm() == 0.0) continue;
      RMat U = smat(x, k);
      out.col(j).segment(o, len) = svec(ri * U * ri.transpose());
    }
  }
  return out;
}

double soc_step(const RVec& x, const RVec& d) {
  double a = soc_Jdot(d, d), b = soc_Jdot(x, d), c = soc_Jdot(x, x);
  double best = kInf;
  auto consider = [&best](double r) {
    if (r > 0 && r < best) best = r;
  };
  double scale = std::max({std::abs(a), std::abs(b), std::abs(c)});
  if (std::abs(a) <= 1e-15 * scale) {
    if (b < 0) consider(-c / (2.0 * b));
  } else {
    double disc = b * b - a * c;
    if (disc >= 0) {
      double sq = std::sqrt(disc);
      double qq = -(b + (b >= 0 ? sq : -sq));
      if (qq != 0.0) {
        consider(qq / a);
        consider(c / qq);
      } else {
        consider(-b / a);
      }
    }
  }
  // First component must stay positive as well.
  if (d(0) < 0) consider(-x(0) / d(0));
  return best;
}

// Largest alpha with lambda + alpha d in the cone (lambda interior, scaled).
double max_step_scaled(const Layout& L, const Scaling& W, const RVec& d) {
  double a = kInf;
  const RVec& lam = W.lambda;
  for (int i = 0; i < L.dims.l; ++i)
    if (d(i) < 0) a = std::min(a, -lam(i) / d(i));
  for (size_t i = 0; i < L.dims.q.size(); ++i) {
    int o = L.q_off[i], q = L.dims.q[i];
    a = std::min(a, soc_step(lam.segment(o, q), d.segment(o, q)));
  }
  for (size_t b = 0; b < L.dims.s.size(); ++b) {
    int k = L.dims.s[b], o = L.s_off[b];
    RMat D = smat(d.segment(o, svec_len(k)), k);
    RVec is = W.lam_psd[b].cwiseSqrt().cwiseInverse();
    RMat T = is.asDiagonal() * D * is.asDiagonal();
    Eigen::SelfAdjointEigenSolver<RMat> es(T, Eigen::EigenvaluesOnly);
    double mn = es.eigenvalues()(0);
    if (mn < 0) a = std::min(a, -1.0 / mn);
  }
  return a;
}

// Smallest "eigenvalue" of x over all cones.
double min_eig(const Layout& L, const RVec& x) {
  double m = kInf;
  for (int i = 0; i < L.dims.l; ++i) m = std::min(m, x(i));
  for (size_t i = 0; i < L.dims.q.size(); ++i) {
    int o = L.q_off[i], q = L.dims.q[i];
    m = std::min(m, x(o) - x.segment(o + 1, q - 1).norm());
  }
  for (size_t b = 0; b < L.dims.s.size(); ++b) {
    int k = L.dims.s[b], o = L.s_off[b];
    Eigen::SelfAdjointEigenSolver<RMat> es(smat(x.segment(o, svec_len(k)), k), Eigen::EigenvaluesOnly);
    m = std::min(m, es.eigenvalues()(0));
  }
  return m;
}

// [M A'; A 0] with symmetric diagonal equilibration; the diagonal of M spans
// many orders of magnitude near the optimum.
struct Kkt {
  Eigen::PartialPivLU<RMat> lu;
  RMat K;
  RVec D;
  int n = 0, p = 0;

  void factor(const RMat& M, const RMat& A) {
    n = static_cast<int>(M.rows());
    p = static_cast<int>(A.rows());
    K.setZero(n + p, n + p);
    K.topLeftCorner(n, n) = M;
    if (p > 0) {
      K.topRightCorner(n, p) = A.transpose();
      K.bottomLeftCorner(p, n) = A;
    }
    D.resize(n + p);
    double dmax = std::max(M.diagonal().maxCoeff(), 0.0);
    for (int i = 0; i < n; ++i) {
      double v = std::max(M(i, i), 1e-14 * dmax);
      D(i) = v > 0 ? 1.0 / std::sqrt(v) : 1.0;
    }
    for (int j = 0; j < p; ++j) {
      double r = A.row(j).cwiseProduct(D.head(n).transpose()).norm();
      D(n + j) = r > 0 ? 1.0 / r : 1.0;
    }
    RMat Kr = D.asDiagonal() * K * D.asDiagonal();
    for (int i = 0; i < n; ++i) Kr(i, i) += 1e-13;
    for (int i = n; i < n + p; ++i) Kr(i, i) -= 1e-13;
    lu.compute(Kr);
  }

  RVec solve(const RVec& rhs) const {
    auto base = [&](const RVec& r) -> RVec { return D.cwiseProduct(lu.solve(RVec(D.cwiseProduct(r)))); };
    RVec u = base(rhs);
    for (int it = 0; it < 3; ++it) {
      RVec r = rhs - K * u;
      u += base(r);
    }
    return u;
  }
};

double norm_or_zero(const RVec& v) { return v.size() ? v.norm() : 0.0; }
double inf_norm(const RVec& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace

int ConeDims::size() const {
  int m = l;
  for (int v : q) m += v;
  for (int k : s) m += k * (k + 1) / 2;
  return m;
}

int ConeDims::degree() const {
  int d = l + static_cast<int>(q.size());
  for (int k : s) d += k;
  return d;
}

std::string to_string(ConicStatus s) {
  switch (s) {
    case ConicStatus::Optimal: return "optimal";
    case ConicStatus::PrimalInfeasible: return "infeasible";
    case ConicStatus::DualInfeasible: return "unbounded";
    case ConicStatus::NumericalFailure: return "numerical-failure";
    case ConicStatus::MaxIterations: return "max-iterations";
    case ConicStatus::Timeout: return "timeout";
  }
  return "?";
}

RVec svec(const RMat& X) {
  int k = static_cast<int>(X.rows());
  RVec v(svec_len(k));
  int p = 0;
  for (int j = 0; j < k; ++j)
    for (int i = j; i < k; ++i) v(p++) = (i == j) ? X(i, j) : kSqrt2 * 0.5 * (X(i, j) + X(j, i));
  return v;
}

RMat smat(const RVec& v, int k) {
  RMat X(k, k);
  int p = 0;
  for (int j = 0; j < k; ++j)
    for (int i = j; i < k; ++i) {
      double val = v(p++);
      if (i == j) {
        X(i, i) = val;
      } else {
        X(i, j) = X(j, i) = val / kSqrt2;
      }
    }
  return X;
}

double cone_violation(const RVec& s, const ConeDims& dims) {
  Layout L(dims);
  return std::max(0.0, -min_eig(L, s));
}

namespace {

ConicSolution solve_scaled(const ConicProblem& P, const ConicOptions& opt) {
  auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&t0] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };
  Layout L(P.dims);
  const int n = static_cast<int>(P.c.size());
  const int m = L.m;
  const int p = static_cast<int>(P.b.size());
  ConicSolution sol;
  if (P.G.rows() != m || P.G.cols() != n || P.h.size() != m || (p > 0 && (P.A.rows() != p || P.A.cols() != n)))
    throw std::invalid_argument("solve_conic: inconsistent dimensions");
  RMat A = p > 0 ? P.A : RMat(0, n);
  const RVec& c = P.c;
  const RVec& h = P.h;
  RVec b = p > 0 ? P.b : RVec(0);
  const double nu = P.dims.degree();
  const RVec e = identity(L);

  const double resx0 = std::max(1.0, c.norm());
  const double resy0 = std::max(1.0, norm_or_zero(b));
  const double resz0 = std::max(1.0, h.norm());

  // Initial point from the W = I system.
  RVec x, y, z, s;
  {
    RMat M = P.G.transpose() * P.G;
    Kkt kkt;
    kkt.factor(M, A);
    RVec rhs(n + p);
    rhs.head(n) = P.G.transpose() * h;
    rhs.tail(p) = b;
    RVec u = kkt.solve(rhs);
    x = u.head(n);
    s = h - P.G * x;
    rhs.head(n) = -c;
    rhs.tail(p).setZero();
    u = kkt.solve(rhs);
    z = P.G * u.head(n);
    y = u.tail(p);
    double ts = -min_eig(L, s);
    double nrms = s.norm();
    if (ts >= -1e-8 * std::max(nrms, 1.0)) s += (1.0 + ts) * e;
    double tz = -min_eig(L, z);
    double nrmz = z.norm();
    if (tz >= -1e-8 * std::max(nrmz, 1.0)) z += (1.0 + tz) * e;
  }
  double tau = 1.0, kappa = 1.0;

  struct Best {
    bool valid = false;
    double score = kInf;
    RVec x, y, z, s;
    double pres, dres, gap, relgap, pcost, dcost;
  } best;
  int stalled = 0;

  auto finish = [&](ConicStatus st, int it) {
    sol.status = st;
    sol.iterations = it;
    sol.seconds = elapsed();
    return sol;
  };

  for (int it = 0; it <= opt.max_iter; ++it) {
    // Residuals of the embedding.
    RVec Gx = P.G * x;
    RVec ra = A.transpose() * y + P.G.transpose() * z + c * tau;
    RVec rb = b * tau - A * x;
    RVec rc = s + Gx - h * tau;
    double cx = c.dot(x), by = b.dot(y), hz = h.dot(z);
    double rd = kappa + cx + by + hz;

    // Normalized point.
    RVec xh = x / tau, yh = y / tau, zh = z / tau, sh = s / tau;
    RVec rpx = A * xh - b;
    RVec rpz = P.G * xh + sh - h;
    RVec rdx = A.transpose() * yh + P.G.transpose() * zh + c;
    double pcost = c.dot(xh), dcost = -h.dot(zh) - b.dot(yh);
    double gap = sh.dot(zh);
    double relgap = kInf;
    if (pcost < 0)
      relgap = gap / -pcost;
    else if (dcost > 0)
      relgap = gap / dcost;
    double pres = std::max(norm_or_zero(rpx) / resy0, rpz.norm() / resz0);
    double dres = rdx.norm() / resx0;
    double pres_abs = std::max(inf_norm(rpx), inf_norm(rpz));
    double dres_abs = inf_norm(rdx);

    if (opt.verbose)
      std::fprintf(stderr, "%3d pcost % .8e dcost % .8e gap %.2e pres %.2e dres %.2e tau %.2e kap %.2e\n",
                   it, pcost, dcost, gap, pres, dres, tau, kappa);

    auto fill = [&] {
      sol.x = xh;
      sol.y = yh;
      sol.z = zh;
      sol.s = sh;
      sol.pcost = pcost;
      sol.dcost = dcost;
      sol.gap = gap;
      sol.relgap = std::isfinite(relgap) ? relgap : gap;
      sol.pres = pres_abs;
      sol.dres = dres_abs;
    };

    bool gap_ok = gap <= opt.abstol || relgap <= opt.reltol;
    if (pres <= opt.feastol && dres <= opt.feastol && gap_ok) {
      fill();
      return finish(ConicStatus::Optimal, it);
    }
    // Track the best iterate that satisfies the backend contract.
    {
      double rg = std::isfinite(relgap) ? relgap : kInf;
      // Absolute primal residuals and relative gap; the dual residual is
      // held to the same level relative to |c|.
      bool contract = pres_abs <= 1e-7 && dres <= 1e-7 && (gap <= 1e-7 || rg <= 1e-7);
      double score = std::max({pres, dres, std::min(gap, rg)});
      if (contract && score < best.score) {
        best = {true, score, xh, yh, zh, sh, pres_abs, dres_abs, gap, std::isfinite(relgap) ? relgap : gap, pcost, dcost};
      }
    }
    // Infeasibility certificates. Roundoff in G'z floors the ratios near
    // 1e-8, so they get their own tolerance, loosened further once tau has
    // collapsed against kappa.
    const double inftol = tau <= 1e-8 * kappa ? 1e3 * opt.inftol : opt.inftol;
    if (hz + by < 0) {
      double pinf = (A.transpose() * y + P.G.transpose() * z).norm() / resx0 / -(hz + by);
      if (pinf <= inftol) {
        sol.x = RVec();
        sol.y = y / -(hz + by);
        sol.z = z / -(hz + by);
        sol.s = RVec();
        return finish(ConicStatus::PrimalInfeasible, it);
      }
    }
    if (cx < 0) {
      double dinf = std::max(norm_or_zero(RVec(A * x)) / resy0, (Gx + s).norm() / resz0) / -cx;
      if (dinf <= inftol) {
        sol.x = x / -cx;
        sol.s = s / -cx;
        return finish(ConicStatus::DualInfeasible, it);
      }
    }
    auto fallback = [&](ConicStatus st) {
      if (best.valid) {
        sol.x = best.x;
        sol.y = best.y;
        sol.z = best.z;
        sol.s = best.s;
        sol.pcost = best.pcost;
        sol.dcost = best.dcost;
        sol.gap = best.gap;
        sol.relgap = best.relgap;
        sol.pres = best.pres;
        sol.dres = best.dres;
        return finish(ConicStatus::Optimal, it);
      }
      fill();
      return finish(st, it);
    };
    if (best.valid && std::max(pres, dres) > 100.0 * best.score) {
      if (++stalled >= 3) return fallback(ConicStatus::NumericalFailure);
    } else {
      stalled = 0;
    }
    if (it == opt.max_iter) return fallback(ConicStatus::MaxIterations);
    if (opt.timeout_s > 0 && elapsed() > opt.timeout_s) return fallback(ConicStatus::Timeout);

    auto Wopt = compute_scaling(L, s, z);
    if (!Wopt) return fallback(ConicStatus::NumericalFailure);
    const Scaling& W = *Wopt;
    const RVec& lam = W.lambda;

    RMat Gs = scale_columns(L, W, P.G);
    RMat M = Gs.transpose() * Gs;
    Kkt kkt;
    kkt.factor(M, A);

    RVec hs = h;
    apply_scaling(L, W, Op::WinvT, hs);

    // Solves [0 A' G'; A 0 0; G 0 -W'W] (ux, uy, uz) = (bx, by, bz) through
    // the reduced system, then refines against the full system: the normal
    // equations lose accuracy as the scaling becomes ill-conditioned.
    // Returns ux, uy and the scaled W uz.
    struct KSol {
      RVec x, y, zs;
    };
    auto reduced = [&](const RVec& bx, const RVec& by, const RVec& bz) {
      RVec bzs = bz;
      apply_scaling(L, W, Op::WinvT, bzs);
      RVec rr(n + p);
      rr.head(n) = bx + Gs.transpose() * bzs;
      rr.tail(p) = by;
      RVec u = kkt.solve(rr);
      KSol k{u.head(n), u.tail(p), Gs * u.head(n) - bzs};
      return k;
    };
    auto ksolve = [&](const RVec& bx, const RVec& by, const RVec& bz) {
      KSol k = reduced(bx, by, bz);
      for (int it = 0; it < 2; ++it) {
        RVec wz = k.zs;
        apply_scaling(L, W, Op::WT, wz);
        RVec ex = bx - A.transpose() * k.y - Gs.transpose() * k.zs;
        RVec ey = by - A * k.x;
        RVec ez = bz - P.G * k.x + wz;
        double enorm = std::max({ex.lpNorm<Eigen::Infinity>(), ey.size() ? ey.lpNorm<Eigen::Infinity>() : 0.0,
                                 ez.lpNorm<Eigen::Infinity>()});
        if (!(enorm > 1e-15)) break;
        KSol d = reduced(ex, ey, ez);
        k.x += d.x;
        k.y += d.y;
        k.zs += d.zs;
      }
      return k;
    };

    // K u1 = [-c; b; h]
    KSol k1 = ksolve(-c, b, h);
    RVec x1 = k1.x, y1 = k1.y, z1 = k1.zs;
    double den = c.dot(x1) + b.dot(y1) + hs.dot(z1) - kappa / tau;

    double mu = (s.dot(z) + kappa * tau) / (nu + 1.0);

    struct Dir {
      RVec dx, dy, dzs, dss;
      double dtau, dkappa, alpha;
    };
    auto direction = [&](double eta, const RVec& ds, double dk) -> Dir {
      RVec lds = jdiv(L, W, ds);
      RVec wl = lds;
      apply_scaling(L, W, Op::WT, wl);
      KSol k2 = ksolve(-eta * ra, eta * rb, -eta * rc - wl);
      RVec x2 = k2.x, y2 = k2.y, z2 = k2.zs;
      double dtau = (-eta * rd - dk / tau - (c.dot(x2) + b.dot(y2) + hs.dot(z2))) / den;
      Dir D;
      D.dx = x2 + dtau * x1;
      D.dy = y2 + dtau * y1;
      D.dzs = z2 + dtau * z1;
      D.dss = lds - D.dzs;
      D.dtau = dtau;
      D.dkappa = (dk - kappa * dtau) / tau;
      double a = std::min(max_step_scaled(L, W, D.dss), max_step_scaled(L, W, D.dzs));
      if (D.dtau < 0) a = std::min(a, -tau / D.dtau);
      if (D.dkappa < 0) a = std::min(a, -kappa / D.dkappa);
      D.alpha = a;
      return D;
    };

    RVec lam2 = jprod(L, lam, lam);
    Dir aff = direction(1.0, -lam2, -kappa * tau);
    double a_aff = std::min(1.0, aff.alpha);
    double sigma = std::pow(1.0 - a_aff, 3);
    RVec ds = -lam2 - jprod(L, aff.dss, aff.dzs) + sigma * mu * e;
    double dk = -kappa * tau - aff.dtau * aff.dkappa + sigma * mu;
    Dir D = direction(1.0 - sigma, ds, dk);
    double alpha = std::min(1.0, 0.99 * D.alpha);
    if (!std::isfinite(alpha) || alpha < 1e-12) return fallback(ConicStatus::NumericalFailure);

    RVec dz = D.dzs, dsv = D.dss;
    apply_scaling(L, W, Op::Winv, dz);
    apply_scaling(L, W, Op::WT, dsv);
    x += alpha * D.dx;
    y += alpha * D.dy;
    z += alpha * dz;
    s += alpha * dsv;
    tau += alpha * D.dtau;
    kappa += alpha * D.dkappa;
    if (!x.allFinite() || !z.allFinite() || !s.allFinite() || !std::isfinite(tau))
      return fallback(ConicStatus::NumericalFailure);
  }
  return finish(ConicStatus::MaxIterations, opt.max_iter);
}

}  // namespace

// Columns are equilibrated before solving: the variables of the beamforming
// programs differ by several orders of magnitude and the normal equations
// degrade accordingly.
ConicSolution solve_conic(const ConicProblem& P, const ConicOptions& opt) {
  const int n = static_cast<int>(P.c.size());
  const int p = static_cast<int>(P.b.size());
  if (P.G.cols() != n || (p > 0 && P.A.cols() != n))
    throw std::invalid_argument("solve_conic: inconsistent dimensions");
  RVec d(n);
  for (int j = 0; j < n; ++j) {
    double nr = P.G.col(j).lpNorm<Eigen::Infinity>();
    if (p > 0) nr = std::max(nr, P.A.col(j).lpNorm<Eigen::Infinity>());
    d(j) = nr > 0 ? std::clamp(1.0 / nr, 1e-4, 1e4) : 1.0;
  }
  ConicProblem S = P;
  S.c = P.c.cwiseProduct(d);
  S.G = P.G * d.asDiagonal();
  if (p > 0) S.A = P.A * d.asDiagonal();
  ConicSolution sol = solve_scaled(S, opt);
  if (sol.x.size() == n) sol.x = sol.x.cwiseProduct(d);
  if (sol.status == ConicStatus::Optimal) {
    RVec rd = P.c + P.G.transpose() * sol.z;
    if (p > 0) rd += P.A.transpose() * sol.y;
    sol.dres = rd.lpNorm<Eigen::Infinity>();
  }
  return sol;
}

}  // namespace cisac
