#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "oracles.hpp"
#include "subq/envelope.hpp"

#include <cmath>
#include <random>
#include <vector>

using namespace subq;
using namespace subq::envelope;

namespace {

// direct extended-precision evaluation of the offset constant
long double k_direct_ld(long double alpha, long double eps) {
  const long double w = powl(1.0L + eps, (2.0L - alpha) / alpha);
  const long double base = w / (2.0L * (alpha - 1.0L) * eps * (w - 1.0L));
  return powl(base, alpha / (2.0L * (alpha - 1.0L)));
}

long double c_tilde_ld(long double alpha, long double gamma) {
  return powl(alpha * gamma, 2.0L / (2.0L - alpha)) /
         (2.0L * powl(2.0L * (alpha - 1.0L) / alpha, 2.0L * (alpha - 1.0L) / (2.0L - alpha)));
}

double ode_rhs(const SubQuadParams& p, double eps, double mu) {
  const double c_coef = c_tilde(p.alpha, p.gamma) * (2.0 - p.alpha) / p.alpha;
  return 2.0 * (p.alpha - 1.0) * p.beta * mu / p.alpha +
         c_coef * (1.0 + eps) * std::pow(mu, -2.0 * (p.alpha - 1.0) / (2.0 - p.alpha));
}

}  // namespace

TEST_CASE("conjugate exponent identity") {
  for (double alpha : {1.01, 1.2, 1.5, 1.8, 1.99, 1.999}) {
    SubQuadParams p{alpha, 0.0, 1.0};
    p.validate();
    CHECK(p.alpha_star() > 2.0);
    CHECK(std::abs(1.0 / p.alpha + 1.0 / p.alpha_star() - 1.0) < 1e-12);
  }
  CHECK_THROWS_AS((SubQuadParams{1.0, 0.0, 1.0}.validate()), std::domain_error);
  CHECK_THROWS_AS((SubQuadParams{2.0, 0.0, 1.0}.validate()), std::domain_error);
  CHECK_THROWS_AS((SubQuadParams{1.5, -1.0, 1.0}.validate()), std::domain_error);
  CHECK_THROWS_AS((SubQuadParams{1.5, 0.0, 0.0}.validate()), std::domain_error);
}

TEST_CASE("offset constant against the extended-precision value") {
  // frozen from the long double evaluation below: 10.672172072454743...
  CHECK(k_alpha_eps(1.5, 1.0) == doctest::Approx(10.6721720724547).epsilon(1e-12));
  CHECK(k_alpha_eps(1.5, 1.0) ==
        doctest::Approx(static_cast<double>(k_direct_ld(1.5L, 1.0L))).epsilon(1e-14));

  // strictly decreasing along growing eps
  const double k10 = k_alpha_eps(1.5, 10.0);
  const double k100 = k_alpha_eps(1.5, 100.0);
  const double k1000 = k_alpha_eps(1.5, 1000.0);
  CHECK(k10 > k100);
  CHECK(k100 > k1000);

  // no singularity anywhere on the admissible domain
  for (double alpha : {1.05, 1.5, 1.95})
    for (double eps : {1e-6, 1e-2, 1.0, 1e3}) {
      const double k = k_alpha_eps(alpha, eps);
      CHECK(std::isfinite(k));
      CHECK(k > 0.0);
    }

  CHECK_THROWS_AS(k_alpha_eps(2.5, 1.0), std::domain_error);
  CHECK_THROWS_AS(k_alpha_eps(1.5, 0.0), std::domain_error);
  CHECK_THROWS_AS(k_alpha_eps(1.5, -1.0), std::domain_error);
}

TEST_CASE("structural constants") {
  // exact rational value 5.6953125
  CHECK(c_tilde(1.5, 1.0) == doctest::Approx(5.6953125).epsilon(1e-14));
  CHECK(c_tilde(1.5, 1.0) ==
        doctest::Approx(static_cast<double>(c_tilde_ld(1.5L, 1.0L))).epsilon(1e-14));

  // drift constant keeps the slope field of the exponent curve exact:
  // c_bar = c_tilde (2 - alpha) / (2 (alpha - 1) beta)
  for (double alpha : {1.2, 1.5, 1.8})
    for (double beta : {0.5, 1.0, 2.0}) {
      const double expected =
          c_tilde(alpha, 1.0) * (2.0 - alpha) / (2.0 * (alpha - 1.0) * beta);
      CHECK(c_bar(alpha, beta, 1.0) == doctest::Approx(expected).epsilon(1e-12));
    }

  // homogeneity in gamma
  for (double alpha : {1.2, 1.5, 1.8}) {
    const double ratio = c_tilde(alpha, 2.0) / c_tilde(alpha, 1.0);
    CHECK(ratio == doctest::Approx(std::pow(2.0, 2.0 / (2.0 - alpha))).epsilon(1e-12));
  }

  CHECK_THROWS_AS(c_bar(1.5, 0.0, 1.0), std::domain_error);
  const auto both = structural_constants({1.5, 1.0, 1.0});
  REQUIRE(both.c_bar.has_value());
  CHECK(*both.c_bar == doctest::Approx(c_bar(1.5, 1.0, 1.0)));
  CHECK_FALSE(structural_constants({1.5, 0.0, 1.0}).c_bar.has_value());
}

TEST_CASE("exponent curve solves its slope field") {
  SUBCASE("drift-free branch against RK4") {
    SubQuadParams p{1.5, 0.0, 1.0};
    const double eps = 0.1;
    const auto curve = EnvelopeCurve::make(p, eps, 1.0);
    auto f = [&](double, double mu) { return ode_rhs(p, eps, mu); };
    const double ref = oracles::rk4(f, eps, 0.0, 1.0, 200000);
    CHECK(curve.mu(1.0) == doctest::Approx(ref).epsilon(1e-8));
  }
  SUBCASE("drift branch against RK4") {
    SubQuadParams p{1.5, 1.0, 1.0};
    const double eps = 0.5;
    const auto curve = EnvelopeCurve::make(p, eps, 1.0);
    auto f = [&](double, double mu) { return ode_rhs(p, eps, mu); };
    const double ref = oracles::rk4(f, eps, 0.0, 1.0, 200000);
    CHECK(curve.mu(1.0) == doctest::Approx(ref).epsilon(1e-8));
  }
  SUBCASE("centered-difference residual on both branches") {
    const double combos[][4] = {{1.2, 0.0, 1.0, 0.5}, {1.5, 0.0, 1.0, 0.1},
                                {1.8, 0.0, 2.0, 1.0}, {1.2, 1.0, 1.0, 0.5},
                                {1.5, 0.5, 1.0, 0.1}, {1.8, 1.0, 2.0, 1.0}};
    for (const auto& c : combos) {
      SubQuadParams p{c[0], c[1], c[2]};
      const double eps = c[3];
      const auto curve = EnvelopeCurve::make(p, eps, 1.0);
      const double h = 1e-5;
      for (int i = 1; i <= 100; ++i) {
        const double s = i / 101.0;
        const double fd = (curve.mu(s + h) - curve.mu(s - h)) / (2.0 * h);
        const double rhs = ode_rhs(p, eps, curve.mu(s));
        CHECK(std::abs(fd - rhs) <= std::max(1e-7, 1e-5 * std::abs(rhs)));
        // closed-form derivative agrees with the slope field too
        CHECK(curve.mu_prime(s) == doctest::Approx(rhs).epsilon(1e-10));
      }
    }
  }
}

TEST_CASE("exponent curve basics") {
  SubQuadParams p{1.5, 0.0, 1.0};
  const auto tilde = EnvelopeCurve::make(p, 0.1, 1.0);
  CHECK(tilde.mu(0.0) == 0.1);

  SubQuadParams pb{1.5, 2.0, 1.0};
  const auto bar = EnvelopeCurve::make(pb, 0.1, 1.0);
  CHECK(bar.mu(0.0) == 0.1);
  CHECK(bar.kind() == CurveKind::BarWithDrift);

  // strictly increasing in s and in eps
  double prev = tilde.mu(0.0);
  for (int i = 1; i <= 16; ++i) {
    const double v = tilde.mu(i / 16.0);
    CHECK(v > prev);
    prev = v;
  }
  CHECK(EnvelopeCurve::make(p, 0.2, 1.0).mu(1.0) > tilde.mu(1.0));

  // vanishing drift joins the drift-free branch
  SubQuadParams p_small{1.5, 1e-6, 1.0};
  const auto nearly = EnvelopeCurve::make(p_small, 0.1, 1.0);
  CHECK(nearly.mu(1.0) == doctest::Approx(tilde.mu(1.0)).epsilon(1e-4));

  CHECK_THROWS_AS(tilde.mu(-0.5), std::domain_error);
  CHECK_THROWS_AS(tilde.mu(1.5), std::domain_error);
  CHECK_THROWS_AS(EnvelopeCurve(p, 0.1, 1.0, CurveKind::BarWithDrift), std::domain_error);
}

TEST_CASE("limit constants for nearly quadratic growth") {
  SubQuadParams p1{1.999, 0.0, 1.0};
  CHECK(std::abs(mu_zero(p1, 1.0) - 2.0) / 2.0 < 0.01);
  SubQuadParams p2{1.999, 0.5, 1.0};
  const double target2 = 2.0 * std::exp(0.5);
  CHECK(std::abs(mu_zero(p2, 1.0) - target2) / target2 < 0.01);
  SubQuadParams p3{1.999, 1.0, 2.0};
  const double target3 = 4.0 * std::exp(0.5);
  CHECK(std::abs(mu_zero(p3, 0.5) - target3) / target3 < 0.01);

  // mu_zero is the vanishing-eps limit of mu(T)
  SubQuadParams p{1.5, 0.5, 1.0};
  const double mu0 = mu_zero(p, 1.0);
  CHECK(std::abs(mu0 - EnvelopeCurve::make(p, 1e-8, 1.0).mu(1.0)) < 1e-4);
  double prev_gap = std::numeric_limits<double>::infinity();
  for (double eps : {1e-2, 1e-4, 1e-6, 1e-8}) {
    const double gap = EnvelopeCurve::make(p, eps, 1.0).mu(1.0) - mu0;
    CHECK(gap > 0.0);
    CHECK(gap < prev_gap);
    prev_gap = gap;
  }
}

TEST_CASE("matching the integrability exponent") {
  SubQuadParams p{1.5, 0.0, 1.0};

  SUBCASE("round trip") {
    for (double eps : {0.01, 0.1, 1.0, 10.0}) {
      const auto curve = EnvelopeCurve::make(p, eps, 1.0);
      const double rec = match_epsilon(p, 1.0, curve.mu(1.0));
      CHECK(std::abs(rec - eps) < 1e-8);
      CHECK(std::abs(EnvelopeCurve::make(p, rec, 1.0).mu(1.0) - curve.mu(1.0)) < 1e-10);
    }
  }
  SUBCASE("target just above the infimum") {
    const double target = mu_zero(p, 1.0) * 1.0001;
    const double eps0 = match_epsilon(p, 1.0, target);
    CHECK(eps0 > 0.0);
    CHECK(eps0 < 0.01);
    CHECK(std::abs(EnvelopeCurve::make(p, eps0, 1.0).mu(1.0) - target) < 1e-10);
  }
  SUBCASE("below the infimum is infeasible") {
    CHECK_THROWS_AS(match_epsilon(p, 1.0, 0.5 * mu_zero(p, 1.0)), InfeasibleError);
  }
}

TEST_CASE("test function values and partials") {
  SubQuadParams p{1.5, 0.0, 1.0};
  const auto curve = EnvelopeCurve::make(p, 0.5, 1.0);
  const TestFunction tf(curve);

  SUBCASE("value at the left edge") {
    const auto v = tf.eval(0.3, 0.0);
    const double expected = std::exp(curve.mu(0.3) * std::pow(curve.k_eps(), p.q()));
    CHECK(v.phi == doctest::Approx(expected).epsilon(1e-13));
    CHECK_FALSE(v.saturated);
  }
  SUBCASE("partials agree with centered differences") {
    for (int is = 0; is < 10; ++is) {
      const double s = 0.05 + 0.9 * is / 9.0;
      for (int ix = 0; ix < 10; ++ix) {
        const double x = 0.1 + 5.0 * ix / 9.0;
        const auto v = tf.eval(s, x);
        const double hx = 1e-5 * (1.0 + x);
        const double hs = 1e-5;
        const double fd_x = (tf.eval(s, x + hx).phi - tf.eval(s, x - hx).phi) / (2.0 * hx);
        const double fd_xx =
            (tf.eval(s, x + hx).phi_x - tf.eval(s, x - hx).phi_x) / (2.0 * hx);
        const double fd_s = (tf.eval(s + hs, x).phi - tf.eval(s - hs, x).phi) / (2.0 * hs);
        CHECK(v.phi_x == doctest::Approx(fd_x).epsilon(1e-5));
        CHECK(v.phi_xx == doctest::Approx(fd_xx).epsilon(1e-5));
        CHECK(v.phi_s == doctest::Approx(fd_s).epsilon(1e-5));
        CHECK(v.phi_s > 0.0);
        CHECK(v.phi_x > 0.0);
        CHECK(v.phi_xx > 0.0);
        CHECK(v.phi >= 1.0);
      }
    }
  }
  SUBCASE("saturation flag") {
    const auto v = tf.eval(1.0, 1e8);
    CHECK(v.saturated);
    CHECK(std::isfinite(v.phi));
  }
}

TEST_CASE("psi basics") {
  SubQuadParams p{1.5, 0.0, 1.0};
  CHECK(psi(0.0, 3.7, p).value == 1.0);
  CHECK(psi(12.0, 0.0, p).value == 1.0);
  double prev = 0.0;
  for (double x : {0.0, 0.5, 1.0, 2.0, 4.0}) {
    const double v = psi(x, 1.0, p).value;
    CHECK(v >= prev);
    prev = v;
  }
  prev = 0.0;
  for (double mu : {0.0, 0.5, 1.0, 2.0}) {
    const double v = psi(2.0, mu, p).value;
    CHECK(v >= prev);
    prev = v;
  }
  CHECK(psi(1e9, 5.0, p).saturated);
  CHECK_THROWS_AS(psi(-1.0, 1.0, p), std::domain_error);
}

TEST_CASE("curvature slack certification") {
  SUBCASE("positive over the parameter box") {
    for (double alpha : {1.2, 1.5, 1.8})
      for (double eps : {0.1, 1.0, 10.0}) {
        SubQuadParams p{alpha, 0.0, 1.0};
        const double delta = certify_delta(EnvelopeCurve::make(p, eps, 1.0));
        CHECK(delta > 0.0);
        CHECK(std::isfinite(delta));
      }
  }
  SUBCASE("agrees with a dense scan") {
    for (double alpha : {1.2, 1.5})
      for (double eps : {1.0, 10.0}) {
        SubQuadParams p{alpha, 0.0, 1.0};
        const auto curve = EnvelopeCurve::make(p, eps, 1.0);
        const double delta = certify_delta(curve);
        const double k = curve.k_eps();
        const double q = p.q();
        const double coef = 2.0 * (alpha - 1.0) * (alpha - 1.0) * eps / (alpha * alpha);
        double dense = std::numeric_limits<double>::infinity();
        const double x_max = std::max({1.0, 4.0 * std::pow(1.0 / (eps * (alpha - 1.0)), 1.0 / q),
                                       4.0 * k});
        for (int i = 0; i <= 1000000; ++i) {
          const double x = x_max * i / 1000000.0;
          const double u = x + k;
          dense = std::min(dense,
                           std::exp(eps * std::pow(u, q)) * coef / std::pow(u, 2.0 / alpha));
        }
        CHECK(delta == doctest::Approx(dense).epsilon(1e-3));
        CHECK(delta <= dense * (1.0 + 1e-12));
      }
  }
  SUBCASE("per-instance pairing of offset and slack") {
    SubQuadParams p{1.5, 0.0, 1.0};
    const auto c1 = EnvelopeCurve::make(p, 1.0, 1.0);
    const auto c10 = EnvelopeCurve::make(p, 10.0, 1.0);
    CHECK(c1.k_eps() > c10.k_eps());
    CHECK(certify_delta(c1) < certify_delta(c10));
  }
}

TEST_CASE("drift inequality on the verification grid") {
  SUBCASE("drift-free branch") {
    SubQuadParams p{1.5, 0.0, 1.0};
    const auto curve = EnvelopeCurve::make(p, 0.5, 1.0);
    const auto chk = verify_envelope_inequality(curve, certify_delta(curve));
    CHECK(chk.pass());
    CHECK(chk.nodes == 50u * 50u * 50u);
    CHECK(chk.violations.empty());
  }
  SUBCASE("drift branch") {
    SubQuadParams p{1.5, 1.0, 1.0};
    const auto curve = EnvelopeCurve::make(p, 0.5, 1.0);
    const auto chk = verify_envelope_inequality(curve, certify_delta(curve));
    CHECK(chk.pass());
  }
  SUBCASE("vanishing-z slice reduces to the time slope") {
    SubQuadParams p{1.5, 0.0, 1.0};
    const auto curve = EnvelopeCurve::make(p, 0.5, 1.0);
    const TestFunction tf(curve);
    for (double s : {0.0, 0.5, 1.0})
      for (double x : {0.0, 1.0, 10.0}) {
        const auto r = tf.ratios(s, x);
        CHECK(r.ps >= 0.0);  // the whole left side at z = 0
      }
  }
  SUBCASE("a slack that is too large is reported") {
    SubQuadParams p{1.5, 0.0, 1.0};
    const auto curve = EnvelopeCurve::make(p, 1.0, 1.0);
    const double honest = certify_delta(curve);
    GridSpec small;
    small.s_count = small.x_count = small.z_count = 12;
    const auto chk = verify_envelope_inequality(curve, 50.0 * honest, small);
    CHECK_FALSE(chk.pass());
    CHECK_FALSE(chk.violations.empty());
  }
}

TEST_CASE("psi sandwich under and over the test function") {
  for (double beta : {0.0, 1.0}) {
    SubQuadParams p{1.5, beta, 1.0};
    const auto curve = EnvelopeCurve::make(p, 0.5, 1.0);
    const TestFunction tf(curve);
    const double kq = std::pow(curve.k_eps(), p.q());
    for (int is = 0; is < 20; ++is) {
      const double s = is / 19.0;
      const double mu = curve.mu(s);
      for (int ix = 0; ix < 20; ++ix) {
        const double x = 12.0 * ix / 19.0;
        const double phi = tf.eval(s, x).phi;
        const double lo = psi(x, mu, p).value;
        CHECK(phi >= lo * (1.0 - 1e-12));
        CHECK(phi <= std::exp(mu * kq) * lo * (1.0 + 1e-12));
      }
    }
  }
}

TEST_CASE("a-priori right side") {
  SubQuadParams p{1.5, 0.0, 1.0};
  const auto bound = make_apriori_bound(EnvelopeCurve::make(p, 0.5, 1.0));
  CHECK(bound.delta > 0.0);
  CHECK(bound.big_c >= 1.0);

  SUBCASE("degenerate sample") {
    const Vec sample = Vec::Constant(64, 1.3);
    const auto r = apriori_rhs(bound, sample);
    const double expected = bound.big_c * psi(1.3, bound.curve.mu(1.0), p).value;
    CHECK(r.value == doctest::Approx(expected).epsilon(1e-13));
    CHECK(r.std_error <= 1e-12 * r.value);  // pure accumulation roundoff
  }
  SUBCASE("all-zero sample") {
    const auto r = apriori_rhs(bound, Vec::Zero(16));
    CHECK(r.value == doctest::Approx(bound.big_c).epsilon(1e-14));
  }
  SUBCASE("half-normal sample against quadrature") {
    // the positive law here is |sigma N|; a plain lognormal has no finite
    // moment of this kind, so it cannot serve as the reference law
    const double sigma = 0.8;
    const double mu_t = bound.curve.mu(1.0);
    auto integrand = [&](double u) {
      const double dens = 2.0 / (sigma * std::sqrt(2.0 * M_PI)) *
                          std::exp(-0.5 * u * u / (sigma * sigma));
      return psi(u, mu_t, p).value * dens;
    };
    const double expected = bound.big_c * oracles::simpson(integrand, 0.0, 12.0 * sigma, 20000);

    std::mt19937 rng(20240812);
    std::normal_distribution<double> normal(0.0, sigma);
    Vec sample(20000);
    for (int i = 0; i < sample.size(); ++i) sample(i) = std::abs(normal(rng));
    const auto r = apriori_rhs(bound, sample);
    CHECK(std::abs(r.value - expected) <= 3.0 * r.std_error);
    CHECK(r.saturated == 0);
  }
  SUBCASE("empty sample is rejected") {
    CHECK_THROWS_AS(apriori_rhs(bound, Vec()), std::invalid_argument);
  }
}
