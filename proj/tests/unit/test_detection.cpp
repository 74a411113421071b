#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <limits>
#include <random>

#include "covert_isac/detection.hpp"
#include "covert_isac/rng.hpp"
#include "doctest.h"

using namespace cisac;

namespace {

StatisticalDepParams stat(double t_A, double lambda_w1, double lambda_A = 1.0, double sigma = 0.0) {
  StatisticalDepParams p;
  p.t_A = t_A;
  p.lambda_w1 = lambda_w1;
  p.lambda_A = lambda_A;
  p.P_A_min = 1.0;
  p.P_A_max = 10.0;
  p.sigma_w2 = sigma;
  return p;
}

}  // namespace

TEST_CASE("bounded false alarm and miss detection") {
  BoundedDepInputs in{1.0, 0.0, 0.0, 1.0, 10.0};
  CHECK(pfa_bounded(in, 0.0) == 1.0);
  CHECK(pfa_bounded(in, -1.0) == 1.0);
  CHECK(pfa_bounded(in, 1.0) == 1.0);  // corrected breakpoint sigma + P_A_min rho1
  CHECK(pfa_bounded(in, in.delta1()) == 0.0);
  CHECK(pfa_bounded(in, 50.0) == 0.0);
  CHECK(pfa_bounded(in, 5.5) == doctest::Approx(0.5));
  McEstimate mc = mc_bounded(in, 5.5, 200000, 1);
  CHECK(std::abs(mc.pfa - 0.5) < 0.005);

  BoundedDepInputs m{1.0, 2.0, 0.0, 1.0, 10.0};
  CHECK(pmd_bounded(m, m.delta2()) == 0.0);
  CHECK(pmd_bounded(m, 0.5) == 0.0);
  CHECK(pmd_bounded(m, m.delta3()) == 1.0);
  CHECK(pmd_bounded(m, 100.0) == 1.0);
  CHECK(pmd_bounded(m, 7.5) == doctest::Approx(0.5));
  mc = mc_bounded(m, 7.5, 200000, 2);
  CHECK(std::abs(mc.pmd - 0.5) < 0.005);
}

TEST_CASE("bounded minimum detection error") {
  DetectionResult none = min_dep_bounded({1.0, 0.0, 1e-3, 1.0, 10.0});
  CHECK(none.xi_star == doctest::Approx(1.0));
  CHECK(none.covert_feasible);

  BoundedDepInputs in{1.0, 4.5, 0.0, 1.0, 10.0};
  DetectionResult r = min_dep_bounded(in);
  CHECK(r.xi_star == doctest::Approx(0.5));
  CHECK(r.gamma_star == doctest::Approx(7.75));  // midpoint of the flat interval [5.5, 10]
  auto xi = [&](double g) { return pfa_bounded(in, g) + pmd_bounded(in, g); };
  GridSearchResult gs = grid_search_gamma(xi, 0.0, in.delta3() + 1.0, 10000);
  CHECK(gs.xi == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(gs.gamma >= in.delta2());
  CHECK(gs.gamma <= in.delta1());
  CHECK(gs.xi >= r.xi_star - 1e-9);

  for (double rho2 : {10.0, 12.0}) {
    DetectionResult bad = min_dep_bounded({1.0, rho2, 0.0, 1.0, 10.0});
    CHECK_FALSE(bad.covert_feasible);
    CHECK(bad.xi_star == 0.0);
  }
}

TEST_CASE("detection probabilities are bounded and monotone") {
  std::mt19937_64 g(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int draw = 0; draw < 1000; ++draw) {
    double pmin = 0.1 + 5 * u(g), pmax = pmin * (1.05 + 20 * u(g));
    BoundedDepInputs in{std::exp(-5 + 10 * u(g)), std::exp(-5 + 10 * u(g)) * u(g), u(g), pmin, pmax};
    StatisticalDepParams p = stat(std::exp(-5 + 10 * u(g)), std::exp(-5 + 10 * u(g)), 1.0, u(g));
    p.P_A_min = pmin;
    p.P_A_max = pmax;
    double hi = std::max(in.delta3(), p.delta_A()) * 1.5;
    double last[4] = {2, -1, 2, -1};
    for (int k = 0; k < 1000; ++k) {
      double gamma = hi * k / 999.0;
      double v[4] = {pfa_bounded(in, gamma), pmd_bounded(in, gamma), pfa_statistical(p, gamma),
                     pmd_statistical(p, gamma)};
      for (double x : v) REQUIRE((x >= 0.0 && x <= 1.0));
      REQUIRE(v[0] <= last[0]);
      REQUIRE(v[1] >= last[1]);
      REQUIRE(v[2] <= last[2]);
      REQUIRE(v[3] >= last[3] - 1e-15);
      std::copy(v, v + 4, last);
    }
  }
}

TEST_CASE("statistical false alarm and miss detection") {
  StatisticalDepParams p = stat(1.0, 2.0);
  CHECK(pfa_statistical(p, 0.0) == 1.0);
  CHECK(pfa_statistical(p, p.delta_A()) == 0.0);
  CHECK(pfa_statistical(p, 5.5) == doctest::Approx(0.5));
  CHECK(pmd_statistical(p, 0.0) == 0.0);
  CHECK(pmd_statistical(p, -3.0) == 0.0);

  // Quadrature over P_A of Pr(t_w1 < gamma - P_A t_A).
  double gamma = 8.0;
  auto f = [&](double pa) { return 1.0 - std::exp(-(gamma - pa) / 2.0); };
  double q = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, 1.0, 8.0, 15, 1e-14) / 9.0;
  CHECK(q == doctest::Approx(0.562266085204959).epsilon(1e-12));
  CHECK(pmd_statistical(p, gamma) == doctest::Approx(q).epsilon(1e-12));
  McEstimate mc = mc_statistical(p, gamma, 1000000, 5);
  CHECK(std::abs(mc.pmd - q) <= 0.005);

  // The simplified middle branch drops the P_A_min floor and sits below the exact value.
  CHECK(pmd_statistical_literal(p, gamma) < pmd_statistical(p, gamma));
  CHECK(pmd_statistical_literal(p, 25.0) == doctest::Approx(pmd_statistical(p, 25.0)).epsilon(1e-12));

  // Nearly deterministic covert power: Pr(P_A t_A < gamma).
  StatisticalDepParams d = stat(1.0, 1e-9);
  CHECK(pmd_statistical(d, 5.0) == doctest::Approx(4.0 / 9.0).epsilon(1e-8));

  // Huge exponents stay finite.
  StatisticalDepParams big = stat(1.0, 1e-3);
  for (double g : {10.5, 11.0, 50.0}) {
    double v = pmd_statistical(big, g);
    CHECK(std::isfinite(v));
    CHECK(v == doctest::Approx(1.0));
  }
}

TEST_CASE("conditional statistical minimum") {
  StatisticalDepParams p = stat(0.7, 1.3, 1.0, 0.05);
  DetectionResult r = min_dep_statistical_conditional(p);
  CHECK(r.gamma_star == doctest::Approx(p.delta_A()));
  auto xi = [&](double g) { return pfa_statistical(p, g) + pmd_statistical(p, g); };
  double lo = 0.0, hi = 2.0 * p.delta_A();
  GridSearchResult gs = grid_search_gamma(xi, lo, hi, 10000);
  CHECK(std::abs(gs.gamma - r.gamma_star) <= (hi - lo) / 9999 + 1e-12);
  CHECK(gs.xi >= r.xi_star - 1e-9);
  CHECK(xi(r.gamma_star) == doctest::Approx(r.xi_star).epsilon(1e-12));

  // Without noise power at the warden any covert power is detected.
  CHECK(min_dep_statistical_conditional(stat(1e-9, 1.0)).xi_star == doctest::Approx(0.0).scale(1.0));
  CHECK(xi_star_statistical_literal(stat(1e-9, 1.0)) == doctest::Approx(0.0).scale(1.0));
  CHECK(min_dep_statistical_conditional(stat(1.0, 1e-9)).xi_star == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("average statistical minimum") {
  StatisticalDepParams p = stat(1.0, 10.0, 1.0);  // tau = 1, pi = 10
  CHECK(p.tau() == doctest::Approx(1.0));
  CHECK(p.mu() == doctest::Approx(1.0 / (p.tau() + 1.0)).epsilon(1e-12));
  CHECK(avg_min_dep_statistical(p) == doctest::Approx(0.285392021600061).epsilon(1e-12));
  CHECK(avg_dep_tau(1.0, 10.0) == doctest::Approx(0.285392021600061).epsilon(1e-12));

  // Averaging the simplified conditional minimum over t_A ~ Exp(lambda_A)
  // reproduces the closed form; averaging the exact minimum gives the
  // slightly larger exact value.
  boost::math::quadrature::exp_sinh<double> es;
  auto avg = [&](auto&& cond) {
    return es.integrate(
        [&](double t) {
          StatisticalDepParams c = p;
          c.t_A = t;
          return cond(c) * std::exp(-t / p.lambda_A) / p.lambda_A;
        },
        0.0, std::numeric_limits<double>::infinity(), 1e-12);
  };
  double q_lit = avg([](const StatisticalDepParams& c) { return xi_star_statistical_literal(c); });
  double q_ex = avg([](const StatisticalDepParams& c) { return min_dep_statistical_conditional(c).xi_star; });
  CHECK(q_lit == doctest::Approx(avg_min_dep_statistical(p)).epsilon(1e-8));
  CHECK(q_ex == doctest::Approx(0.286829015364006).epsilon(1e-10));
  CHECK(avg_min_dep_statistical_exact(p) == doctest::Approx(q_ex).epsilon(1e-10));
  McEstimate mc = mc_avg_statistical(p, 1000000, 9);
  CHECK(std::abs(mc.xi - q_ex) <= 0.005);

  // Growing P_A_max drives the average to one.
  StatisticalDepParams wide = p;
  wide.P_A_max = 1e8;
  CHECK(avg_min_dep_statistical(wide) > 0.999);
}

TEST_CASE("tau form") {
  std::mt19937_64 g(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 10000; ++i) {
    StatisticalDepParams p = stat(1.0, std::exp(-6 + 12 * u(g)), std::exp(-6 + 12 * u(g)));
    p.P_A_min = 0.1 + 4 * u(g);
    p.P_A_max = p.P_A_min * (1.01 + 50 * u(g));
    REQUIRE(p.mu() == doctest::Approx(1.0 / (p.tau() + 1.0)).epsilon(1e-12));
    REQUIRE(std::abs(avg_min_dep_statistical(p) - avg_dep_tau(p.tau(), p.pi_ratio())) <= 1e-12);
  }
  CHECK_THROWS_AS(avg_dep_tau(0.0, 10.0), DomainError);
  CHECK_THROWS_AS(avg_dep_tau(-1.0, 10.0), DomainError);
  CHECK(avg_dep_tau_total(0.0, 10.0) == 0.0);
  CHECK(avg_dep_tau(1e-9, 10.0) == doctest::Approx(0.0).scale(1.0));
  CHECK(avg_dep_tau(1e6, 10.0) >= 0.999);
  CHECK(dep_f(2.0, 10.0) == doctest::Approx(1.0 - avg_dep_tau(2.0, 10.0)));
}

TEST_CASE("tau form is increasing") {
  for (int k = 0; k < 200; ++k) {
    double tau = std::pow(10.0, -3.0 + 6.0 * k / 199.0);
    double h = 1e-6 * tau;
    double fd = (avg_dep_tau(tau + h, 10.0) - avg_dep_tau(tau - h, 10.0)) / (2 * h);
    double d = avg_dep_tau_derivative(tau, 10.0);
    CHECK(d > 0.0);
    CHECK(fd > 0.0);
    CHECK(fd == doctest::Approx(d).epsilon(1e-5));
    CHECK(avg_dep_tau(tau * 1.01, 10.0) > avg_dep_tau(tau, 10.0));
  }
}

TEST_CASE("covertness root") {
  for (double eps : {0.01, 0.05, 0.1, 0.3}) {
    double t = solve_tau_epsilon(eps, 10.0);
    CHECK(std::abs(dep_f(t, 10.0) - eps) <= 1e-10);
    CHECK(std::abs(avg_dep_tau(t, 10.0) - (1.0 - eps)) <= 1e-9);
  }
  CHECK(solve_tau_epsilon(0.1, 10.0) == doctest::Approx(40.2435478494252).epsilon(1e-10));
  CHECK(solve_tau_epsilon(0.999999, 10.0) < 1e-4);
  CHECK_THROWS_AS(solve_tau_epsilon(0.0, 10.0), DomainError);
  CHECK_THROWS_AS(solve_tau_epsilon(1.0, 10.0), DomainError);
  CHECK_THROWS_AS(solve_tau_epsilon(1e-300, 10.0), DomainError);
}

TEST_CASE("instantaneous warden knowledge") {
  CHECK(avg_min_dep_instantaneous(0.0, 1, 10).xi_bar == 1.0);
  CHECK(avg_min_dep_instantaneous(0.9, 1, 10).xi_bar == doctest::Approx(0.9));
  CHECK(avg_min_dep_instantaneous(4.5, 1, 10).xi_bar == doctest::Approx(0.5));
  InstantaneousDep over = avg_min_dep_instantaneous(12.0, 1, 10);
  CHECK(over.xi_bar == 0.0);
  CHECK_FALSE(over.covert_feasible);
  CHECK(instantaneous_power_bound(0.1, 1, 10) == doctest::Approx(0.9));

  // The simplified average ignores the clamp at zero; the gap is
  // (P_b/D) e^{-D/P_b} and vanishes in the covert regime P_b <= eps D.
  for (double Pb : {0.9, 4.5}) {
    double gap = Pb / 9.0 * std::exp(-9.0 / Pb);
    CHECK(avg_min_dep_instantaneous_exact(Pb, 1, 10) ==
          doctest::Approx(avg_min_dep_instantaneous(Pb, 1, 10).xi_bar + gap).epsilon(1e-12));
  }
  CHECK(avg_min_dep_instantaneous_exact(4.5, 1, 10) == doctest::Approx(0.567667641618306).epsilon(1e-12));
  for (double rho1 : {1e-3, 1.0}) {
    McEstimate mc = mc_instantaneous(4.5, rho1, 1, 10, 0.0, 1000000, 6);
    CHECK(std::abs(mc.xi - 0.567667641618306) <= 0.005);
  }
}

TEST_CASE("grid search") {
  GridSearchResult c = grid_search_gamma([](double) { return 0.3; }, 2.0, 5.0, 7);
  CHECK(c.gamma == 2.0);
  CHECK(c.xi == 0.3);
  GridSearchResult q = grid_search_gamma([](double g) { return (g - 1.0) * (g - 1.0); }, 0.0, 2.0, 3);
  CHECK(q.gamma == 1.0);
  CHECK_THROWS(grid_search_gamma([](double) { return 0.0; }, 1.0, 1.0, 10));
  CHECK_THROWS(grid_search_gamma([](double) { return 0.0; }, 0.0, 1.0, 1));

  BoundedDepInputs in{1.0, 1.0, 0.0, 1.0, 10.0};
  auto curves = sample_curves([&](double g) { return pfa_bounded(in, g); },
                              [&](double g) { return pmd_bounded(in, g); }, 0.0, 12.0, 25);
  REQUIRE(curves.size() == 25);
  for (const CurvePoint& pt : curves) CHECK(pt.xi == pt.pfa + pt.pmd);
}

TEST_CASE("warden statistic of a fixed beam is exponential") {
  const int N = 10;
  const long n = 1000000;
  Rng rng = substream(3, "test");
  CMat X = CMat::Random(N, N);
  CMat Omega = X * X.adjoint() / N;
  double l_w = 2e-4;
  CVec w1 = CVec::Random(N);
  CMat root = hermitian_sqrt(Omega);
  double mean = l_w * (w1.adjoint() * Omega * w1)(0, 0).real();
  double s = 0.0, s2 = 0.0;
  for (long i = 0; i < n; ++i) {
    CVec h = std::sqrt(l_w) * root * complex_gaussian(rng, N);
    double t = std::norm(h.dot(w1));
    s += t;
    s2 += t * t;
  }
  double m = s / n, var = s2 / n - m * m;
  CHECK(std::abs(m / mean - 1.0) <= 0.01);
  CHECK(std::abs(var / (mean * mean) - 1.0) <= 0.03);
}

TEST_CASE("simulated warden against a design") {
  SystemConfig cfg;
  ChannelSet ch = generate_channels(cfg);
  CMat T = CMat::Identity(cfg.N, cfg.N) * (cfg.P_A / cfg.N);
  CMat W1 = CMat::Zero(cfg.N, cfg.N);
  for (WcsiMode mode : {WcsiMode::Bounded, WcsiMode::Gaussian, WcsiMode::Statistical}) {
    McEstimate e = monte_carlo_dep(cfg, ch, mode, W1, T, Detector{}, 20000, 8);
    CHECK(e.xi >= 1.0 - e.hw_xi - 1e-12);
  }
  CHECK_THROWS(monte_carlo_dep(cfg, ch, WcsiMode::Bounded, CMat::Zero(3, 3), T, Detector{}, 20000, 8));
}
