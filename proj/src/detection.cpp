#include "covert_isac/detection.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <thread>

#include "covert_isac/rng.hpp"

namespace cisac {

namespace {

double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

}  // namespace

double pfa_bounded(const BoundedDepInputs& in, double gamma) {
  double lo = in.sigma_w2 + in.P_A_min * in.rho1;
  if (gamma <= lo) return 1.0;
  if (gamma >= in.delta1()) return 0.0;
  return clamp01(1.0 - (gamma - lo) / ((in.P_A_max - in.P_A_min) * in.rho1));
}

double pmd_bounded(const BoundedDepInputs& in, double gamma) {
  double lo = in.delta2() + in.P_A_min * in.rho1;
  if (gamma <= lo) return 0.0;
  if (gamma >= in.delta3()) return 1.0;
  return clamp01((gamma - lo) / ((in.P_A_max - in.P_A_min) * in.rho1));
}

DetectionResult min_dep_bounded(const BoundedDepInputs& in) {
  DetectionResult r;
  double spread = (in.P_A_max - in.P_A_min) * in.rho1;
  double flat_lo = in.delta2() + in.P_A_min * in.rho1;  // P_MD starts rising
  double flat_hi = in.delta1();                          // P_FA reaches zero
  if (!(spread > 0.0)) {
    // No DFAN leverage at Willie: any signal power is perfectly detectable.
    r.xi_star = in.rho2 > 0.0 ? 0.0 : 1.0;
    r.covert_feasible = in.rho2 <= 0.0;
    r.gamma_star = in.sigma_w2 + 0.5 * in.rho2;
    return r;
  }
  r.xi_star = clamp01(1.0 - in.rho2 / spread);
  // Between the two kinks xi is flat; the interval is ordered one way when
  // xi* > 0 and the other way when both probabilities can vanish together.
  r.gamma_star = 0.5 * (flat_lo + flat_hi);
  r.covert_feasible = in.delta1() > in.delta2() && r.xi_star > 0.0;
  return r;
}

double pfa_statistical(const StatisticalDepParams& p, double gamma) {
  BoundedDepInputs in{p.t_A, 0.0, p.sigma_w2, p.P_A_min, p.P_A_max};
  return pfa_bounded(in, gamma);
}

double pmd_statistical(const StatisticalDepParams& p, double gamma) {
  double x = gamma - p.sigma_w2;
  double lam = p.lambda_w1;
  double ta = p.t_A;
  if (x <= 0.0) return 0.0;
  if (!(lam > 0.0)) {
    BoundedDepInputs in{ta, 0.0, p.sigma_w2, p.P_A_min, p.P_A_max};
    return pmd_bounded(in, gamma);
  }
  double c = x - p.P_A_min * ta;
  if (c <= 0.0) return 0.0;
  if (x < p.P_A_max * ta) return clamp01((c + lam * std::expm1(-c / lam)) / p.p_alpha());
  // x >= Pmax t_A: 1 - lam e^{-(x - Pmax t_A)/lam} (1 - e^{-(Pmax-Pmin) t_A / lam}) / p_alpha.
  double tail = std::exp(-(x - p.P_A_max * ta) / lam) * (-std::expm1(-p.spread() * ta / lam));
  return clamp01(1.0 - lam * tail / p.p_alpha());
}

double pmd_statistical_literal(const StatisticalDepParams& p, double gamma) {
  double x = gamma - p.sigma_w2;
  double lam = p.lambda_w1;
  double ta = p.t_A;
  if (x <= 0.0) return 0.0;
  if (x < p.P_A_max * ta) {
    double e = std::exp(-x / lam);
    return clamp01((x - p.P_A_min * ta + p.P_A_min * ta * e + lam * (e - 1.0)) / p.p_alpha());
  }
  // Exponents are combined before exponentiation; e^{t_A Pmax / lam} alone
  // overflows once it passes ~700.
  double a_max = ta * p.P_A_max / lam;
  double a_min = ta * p.P_A_min / lam;
  double tail;
  if (a_max > 700.0)
    tail = std::exp(a_max - x / lam) - std::exp(a_min - x / lam);
  else
    tail = std::exp(-x / lam) * (std::exp(a_max) - std::exp(a_min));
  return clamp01(1.0 - lam * tail / p.p_alpha());
}

DetectionResult min_dep_statistical_conditional(const StatisticalDepParams& p) {
  DetectionResult r;
  r.gamma_star = p.delta_A();
  double lam = p.lambda_w1;
  double a = p.spread() * p.t_A;
  if (!(lam > 0.0) || !(a > 0.0)) {
    r.xi_star = 1.0;
  } else {
    r.xi_star = clamp01(1.0 + lam * std::expm1(-a / lam) / a);
  }
  r.covert_feasible = r.xi_star > 0.0;
  return r;
}

double xi_star_statistical_literal(const StatisticalDepParams& p) {
  double e = std::exp(-p.P_A_max * p.t_A / p.lambda_w1);
  return 1.0 + p.lambda_w1 * (e - 1.0) / p.p_alpha() + p.p_beta() * e;
}

double avg_min_dep_statistical(const StatisticalDepParams& p) {
  // ln mu = -ln(1 + tau), kept accurate as mu -> 1.
  return 1.0 - p.nu() * std::log1p(p.tau()) + p.p_beta() * p.mu();
}

double avg_min_dep_statistical_exact(const StatisticalDepParams& p) {
  return 1.0 - p.nu() * std::log1p(p.spread() * p.lambda_A / p.lambda_w1);
}

double dep_f(double tau, double pi_ratio) {
  return pi_ratio / (pi_ratio - 1.0) * std::log1p(tau) / tau -
         1.0 / (pi_ratio - 1.0) / (tau + 1.0);
}

double avg_dep_tau(double tau, double pi_ratio) {
  if (!(tau > 0.0)) throw DomainError("avg_dep_tau: tau must be > 0");
  if (!(pi_ratio > 1.0)) throw DomainError("avg_dep_tau: pi must be > 1");
  return 1.0 - dep_f(tau, pi_ratio);
}

double avg_dep_tau_total(double tau, double pi_ratio) {
  if (tau == 0.0) return 0.0;
  return avg_dep_tau(tau, pi_ratio);
}

double avg_dep_tau_derivative(double tau, double pi_ratio) {
  double L = std::log1p(tau);
  double br = tau - (1.0 + tau) * L + (1.0 + 1.0 / pi_ratio) * tau * tau - tau * (1.0 + tau) * L;
  return -pi_ratio / ((pi_ratio - 1.0) * (1.0 + tau) * (1.0 + tau) * tau * tau) * br;
}

double solve_tau_epsilon(double epsilon, double pi_ratio) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw DomainError("solve_tau_epsilon: epsilon outside (0,1)");
  if (!(pi_ratio > 1.0)) throw DomainError("solve_tau_epsilon: pi must be > 1");
  double lo = 1e-12;
  if (dep_f(lo, pi_ratio) <= epsilon) return lo;
  double hi = 1.0;
  const double cap = 1e15;
  while (dep_f(hi, pi_ratio) > epsilon) {
    lo = hi;
    hi *= 2.0;
    if (hi > cap) throw DomainError("solve_tau_epsilon: root exceeds the expansion cap");
  }
  for (int it = 0; it < 400; ++it) {
    double mid = 0.5 * (lo + hi);
    double fm = dep_f(mid, pi_ratio);
    if (fm > epsilon)
      lo = mid;
    else
      hi = mid;
    if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * hi) break;
  }
  // Endpoint with the smaller residual.
  double flo = std::abs(dep_f(lo, pi_ratio) - epsilon);
  double fhi = std::abs(dep_f(hi, pi_ratio) - epsilon);
  return flo < fhi ? lo : hi;
}

InstantaneousDep avg_min_dep_instantaneous(double P_b, double P_A_min, double P_A_max) {
  double spread = P_A_max - P_A_min;
  InstantaneousDep r;
  if (P_b > spread) {
    r.xi_bar = 0.0;
    r.covert_feasible = false;
    return r;
  }
  r.xi_bar = clamp01(1.0 - P_b / spread);
  r.covert_feasible = r.xi_bar > 0.0;
  return r;
}

double avg_min_dep_instantaneous_exact(double P_b, double P_A_min, double P_A_max) {
  double spread = P_A_max - P_A_min;
  if (P_b <= 0.0) return 1.0;
  return 1.0 + (P_b / spread) * std::expm1(-spread / P_b);
}

double instantaneous_power_bound(double epsilon, double P_A_min, double P_A_max) {
  return epsilon * (P_A_max - P_A_min);
}

GridSearchResult grid_search_gamma(const std::function<double(double)>& xi_fn, double lo, double hi,
                                   int points) {
  if (points < 2) throw std::invalid_argument("grid_search_gamma: need at least 2 points");
  if (!(hi > lo)) throw std::invalid_argument("grid_search_gamma: empty range");
  GridSearchResult best{lo, xi_fn(lo)};
  for (int i = 1; i < points; ++i) {
    double g = lo + (hi - lo) * i / (points - 1);
    double v = xi_fn(g);
    if (v < best.xi) best = {g, v};
  }
  return best;
}

std::vector<CurvePoint> sample_curves(const std::function<double(double)>& pfa,
                                      const std::function<double(double)>& pmd, double lo,
                                      double hi, int points) {
  std::vector<CurvePoint> out;
  for (int i = 0; i < points; ++i) {
    double g = points == 1 ? lo : lo + (hi - lo) * i / (points - 1);
    double a = pfa(g), b = pmd(g);
    out.push_back({g, a, b, a + b});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Monte Carlo

int worker_threads() {
  if (const char* s = std::getenv("COVERT_ISAC_THREADS")) {
    int v = std::atoi(s);
    if (v >= 1) return v;
  }
  unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

namespace {

struct Counts {
  long fa = 0, md = 0, n = 0;
};

// Runs body(chunk, samples) for each fixed chunk and sums the counts.
template <class Body>
Counts run_chunks(long n, Body body) {
  std::vector<Counts> parts(kMcChunks);
  auto work = [&](int c) {
    long share = n / kMcChunks + (c < n % kMcChunks ? 1 : 0);
    parts[c] = body(c, share);
  };
  int nt = std::min(worker_threads(), kMcChunks);
  if (nt <= 1) {
    for (int c = 0; c < kMcChunks; ++c) work(c);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < nt; ++t)
      pool.emplace_back([&, t] {
        for (int c = t; c < kMcChunks; c += nt) work(c);
      });
    for (auto& th : pool) th.join();
  }
  Counts tot;
  for (auto& p : parts) {
    tot.fa += p.fa;
    tot.md += p.md;
    tot.n += p.n;
  }
  return tot;
}

McEstimate finish(const Counts& c) {
  McEstimate e;
  e.n = c.n;
  double n = static_cast<double>(c.n);
  e.pfa = c.fa / n;
  e.pmd = c.md / n;
  e.xi = e.pfa + e.pmd;
  double vfa = e.pfa * (1.0 - e.pfa) / n;
  double vmd = e.pmd * (1.0 - e.pmd) / n;
  e.hw_pfa = 1.96 * std::sqrt(vfa);
  e.hw_pmd = 1.96 * std::sqrt(vmd);
  e.hw_xi = 1.96 * std::sqrt(vfa + vmd);
  return e;
}

}  // namespace

McEstimate mc_bounded(const BoundedDepInputs& in, double gamma, long n, std::uint64_t seed) {
  return finish(run_chunks(n, [&](int c, long m) {
    Rng rng = substream(seed, "mc-bounded", c);
    std::uniform_real_distribution<double> pa(in.P_A_min, in.P_A_max);
    Counts k;
    for (long i = 0; i < m; ++i) {
      if (pa(rng) * in.rho1 + in.sigma_w2 > gamma) ++k.fa;
      if (pa(rng) * in.rho1 + in.rho2 + in.sigma_w2 < gamma) ++k.md;
    }
    k.n = m;
    return k;
  }));
}

McEstimate mc_statistical(const StatisticalDepParams& p, double gamma, long n, std::uint64_t seed) {
  return finish(run_chunks(n, [&](int c, long m) {
    Rng rng = substream(seed, "mc-statistical", c);
    std::uniform_real_distribution<double> pa(p.P_A_min, p.P_A_max);
    std::exponential_distribution<double> tw(1.0 / p.lambda_w1);
    Counts k;
    for (long i = 0; i < m; ++i) {
      if (pa(rng) * p.t_A + p.sigma_w2 > gamma) ++k.fa;
      if (pa(rng) * p.t_A + tw(rng) + p.sigma_w2 < gamma) ++k.md;
    }
    k.n = m;
    return k;
  }));
}

McEstimate mc_avg_statistical(const StatisticalDepParams& p, long n, std::uint64_t seed) {
  return finish(run_chunks(n, [&](int c, long m) {
    Rng rng = substream(seed, "mc-avg-statistical", c);
    std::uniform_real_distribution<double> pa(p.P_A_min, p.P_A_max);
    std::exponential_distribution<double> tw(1.0 / p.lambda_w1);
    std::exponential_distribution<double> ta(1.0 / p.lambda_A);
    Counts k;
    for (long i = 0; i < m; ++i) {
      double t0 = ta(rng);
      double g0 = p.P_A_max * t0 + p.sigma_w2;
      if (pa(rng) * t0 + p.sigma_w2 > g0) ++k.fa;
      double t1 = ta(rng);
      double g1 = p.P_A_max * t1 + p.sigma_w2;
      if (pa(rng) * t1 + tw(rng) + p.sigma_w2 < g1) ++k.md;
    }
    k.n = m;
    return k;
  }));
}

McEstimate mc_instantaneous(double P_b, double rho1, double P_A_min, double P_A_max,
                            double sigma_w2, long n, std::uint64_t seed) {
  return finish(run_chunks(n, [&](int c, long m) {
    Rng rng = substream(seed, "mc-instantaneous", c);
    std::uniform_real_distribution<double> pa(P_A_min, P_A_max);
    std::exponential_distribution<double> r2(1.0 / (P_b * rho1));
    Counts k;
    for (long i = 0; i < m; ++i) {
      // Two independent channel draws, one per hypothesis.
      BoundedDepInputs in0{rho1, r2(rng), sigma_w2, P_A_min, P_A_max};
      double g0 = min_dep_bounded(in0).gamma_star;
      if (pa(rng) * rho1 + sigma_w2 > g0) ++k.fa;
      BoundedDepInputs in1{rho1, r2(rng), sigma_w2, P_A_min, P_A_max};
      double g1 = min_dep_bounded(in1).gamma_star;
      if (pa(rng) * rho1 + in1.rho2 + sigma_w2 < g1) ++k.md;
    }
    k.n = m;
    return k;
  }));
}

McEstimate monte_carlo_dep(const SystemConfig& cfg, const ChannelSet& ch, WcsiMode mode,
                           const CMat& W1, const CMat& T, const Detector& det, long n,
                           std::uint64_t seed) {
  int N = cfg.N;
  if (W1.rows() != N || W1.cols() != N || T.rows() != N || T.cols() != N)
    throw std::invalid_argument("monte_carlo_dep: design dimension mismatch");
  CMat Tn = T / cfg.P_A;
  CMat gsq = hermitian_sqrt(ch.gamma_w);
  CMat osq = hermitian_sqrt(ch.Omega_w) * std::sqrt(ch.l_w);
  double s2 = cfg.sigma_w2;

  auto draw_h = [&](Rng& rng) -> CVec {
    switch (mode) {
      case WcsiMode::Bounded: return ch.h_w_hat + uniform_in_ball(rng, N, ch.eps_w);
      case WcsiMode::Gaussian: return ch.h_w_hat + gsq * complex_gaussian(rng, N);
      default: return osq * complex_gaussian(rng, N);
    }
  };
  auto threshold = [&](double rho1, double rho2) {
    if (!det.adaptive) return det.gamma;
    if (mode == WcsiMode::Statistical) return cfg.P_A_max * rho1 + s2;
    BoundedDepInputs in{rho1, rho2, s2, cfg.P_A_min, cfg.P_A_max};
    return min_dep_bounded(in).gamma_star;
  };

  return finish(run_chunks(n, [&](int c, long m) {
    Rng rng = substream(seed, "mc-design", c);
    std::uniform_real_distribution<double> pa(cfg.P_A_min, cfg.P_A_max);
    Counts k;
    for (long i = 0; i < m; ++i) {
      CVec h0 = draw_h(rng);
      double r1 = quad_form(Tn, h0), r2 = quad_form(W1, h0);
      if (pa(rng) * r1 + s2 > threshold(r1, r2)) ++k.fa;
      CVec h1 = draw_h(rng);
      r1 = quad_form(Tn, h1);
      r2 = quad_form(W1, h1);
      if (pa(rng) * r1 + r2 + s2 < threshold(r1, r2)) ++k.md;
    }
    k.n = m;
    return k;
  }));
}

}  // namespace cisac
