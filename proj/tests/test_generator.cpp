#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "subq/generator.hpp"

#include <cmath>
#include <random>

using namespace subq;
using namespace subq::gen;

namespace {

Vec v1(double x) {
  Vec v(1);
  v(0) = x;
  return v;
}

MarkovGenerator custom(GenFn fn, SubQuadParams declared) {
  MarkovGenerator g;
  g.eval = std::move(fn);
  g.declared = declared;
  return g;
}

}  // namespace

TEST_CASE("growth bound check") {
  const auto grid = default_sample_grid();

  SUBCASE("zero driver sits exactly on the bound at the origin") {
    const auto rep = check_H1(make_generator("zero"), grid);
    CHECK(rep.pass());
    CHECK(rep.margin == doctest::Approx(0.0));
  }
  SUBCASE("pure power of |z| is the equality case on the y = 0 slice") {
    const auto rep = check_H1(make_generator("abs_z_alpha", {{"gamma", 1.0}, {"alpha", 1.5}}), grid);
    CHECK(rep.pass());
    CHECK(rep.margin == doctest::Approx(0.0));
  }
  SUBCASE("squared |z| with a smaller declared exponent fails at large |z|") {
    const auto rep = check_H1(make_generator("quadratic_z"), grid);
    CHECK_FALSE(rep.pass());
    // |z|^2 > |z|^1.5 exactly beyond |z| = 1
    bool found_large = false;
    for (const auto& v : rep.violations) found_large = found_large || v.lhs > 16.0 - 1e-9;
    CHECK(found_large);
  }
}

TEST_CASE("one-sided growth checks") {
  const auto grid = default_sample_grid();

  SUBCASE("negative cube passes the signed bound with no linear term") {
    const auto rep =
        check_H1_one_sided(make_generator("minus_y_cubed"), grid, OneSidedVariant::H1DoublePrime);
    CHECK(rep.pass());
  }
  SUBCASE("positive cube fails for large y") {
    auto g = custom([](double, const Vec&, double y, const Vec&) { return y * y * y; },
                    {1.5, 0.0, 1.0});
    g.h_of_y = [](double) { return 0.0; };
    g.c_quad = 1.0;
    const auto rep = check_H1_one_sided(g, grid, OneSidedVariant::H1DoublePrime);
    CHECK_FALSE(rep.pass());
  }
  SUBCASE("constant driver passes with its own offset") {
    auto g = custom([](double, const Vec&, double, const Vec&) { return -2.5; }, {1.5, 0.0, 1.0});
    g.f0 = 2.5;
    g.h_of_y = [](double) { return 0.0; };
    g.c_quad = 1.0;
    CHECK(check_H1_one_sided(g, grid, OneSidedVariant::H1DoublePrime).pass());
    CHECK(check_H1_one_sided(g, grid, OneSidedVariant::H1Prime).pass());
  }
  SUBCASE("missing two-sided declaration is an error") {
    auto g = custom([](double, const Vec&, double, const Vec&) { return 0.0; }, {1.5, 0.0, 1.0});
    CHECK_THROWS_AS(check_H1_one_sided(g, grid, OneSidedVariant::H1DoublePrime),
                    std::invalid_argument);
  }
}

TEST_CASE("convexity test") {
  const auto grid = default_sample_grid();

  SUBCASE("power of |z| is convex") {
    const auto rep = check_H2(make_generator("abs_z_alpha"), grid);
    CHECK(rep.pass());
    CHECK(rep.note == "convex");
  }
  SUBCASE("sine of y is neither") {
    const auto rep = check_H2(make_generator("sin_y"), grid);
    CHECK_FALSE(rep.pass());
    CHECK(rep.note == "neither convex nor concave");
  }
  SUBCASE("affine is both with zero margin") {
    const auto rep = check_H2(make_generator("affine", {{"a", 1.0}, {"b", 2.0}}), grid);
    CHECK(rep.pass());
    CHECK(rep.note == "convex and concave");
    CHECK(rep.margin == doctest::Approx(0.0));
  }
}

TEST_CASE("theta-difference growth condition") {
  const auto tuples = default_theta_tuples();

  SUBCASE("convex driver passes with no coupling constant") {
    const auto g = make_generator("abs_z_alpha");
    REQUIRE(g.h2p.has_value());
    CHECK(g.h2p->k == 0.0);
    CHECK(check_H2_prime(g, tuples).pass());
  }
  SUBCASE("Lipschitz-in-y passes with twice the slope as coupling") {
    const auto g = make_generator("sin_y");
    REQUIRE(g.h2p.has_value());
    CHECK(g.h2p->k == 2.0);
    CHECK(check_H2_prime(g, tuples).pass());
  }
  SUBCASE("bounded product with compactly supported factor") {
    const auto g = make_generator("lq_product", {{"M", 1.0}, {"R", 2.0}});
    CHECK(check_H2_prime(g, tuples).pass());
    CHECK_FALSE(check_H2(g, default_sample_grid()).pass());
  }
  SUBCASE("negative cube fails") {
    CHECK_FALSE(check_H2_prime(make_generator("minus_y_cubed"), tuples).pass());
  }
  SUBCASE("sum of certified drivers passes with summed constants") {
    const auto ga = make_generator("abs_z_alpha");
    const auto gb = make_generator("sin_y");
    MarkovGenerator sum;
    sum.eval = [ga, gb](double t, const Vec& x, double y, const Vec& z) {
      return ga(t, x, y, z) + gb(t, x, y, z);
    };
    sum.declared = {1.5, 1.0, 1.0};
    H2PrimeDecl d;
    d.f0 = ga.h2p->f0 + gb.h2p->f0;
    d.fx_k = ga.h2p->fx_k + gb.h2p->fx_k;
    d.fx_p = 1.0;
    d.k = ga.h2p->k + gb.h2p->k;
    d.beta = ga.h2p->beta + gb.h2p->beta;
    d.gamma = ga.h2p->gamma + gb.h2p->gamma;
    d.alpha = 1.5;
    sum.h2p = d;
    CHECK(check_H2_prime(sum, tuples).pass());
  }
}

TEST_CASE("registry flags match the sampled checks") {
  const auto grid = default_sample_grid();
  const auto tuples = default_theta_tuples();
  for (const auto& name : generator_names()) {
    CAPTURE(name);
    const auto g = make_generator(name);
    CHECK(check_H1(g, grid).pass() == g.flag_h1);
    CHECK(check_H1_one_sided(g, grid, OneSidedVariant::H1DoublePrime).pass() == g.flag_h1dp);
    CHECK(check_H2(g, grid).pass() == g.flag_h2);
    CHECK(check_H2_prime(g, tuples).pass() == g.flag_h2prime);
  }
}

TEST_CASE("composite driver from the registry") {
  const auto g = make_generator("composite_example");
  const auto grid = default_sample_grid();
  CHECK_FALSE(check_H1(g, grid).pass());            // superlinear in y
  CHECK_FALSE(check_H2(g, grid).pass());            // the sine summand breaks both
  CHECK(check_H2_prime(g, default_theta_tuples()).pass());
  const auto h = make_terminal("abs_pow_cos", {{"p", 1.2}});
  CHECK(check_A2(g, h, grid).pass());
}

TEST_CASE("truncation") {
  SUBCASE("scalar clamps") {
    CHECK(truncate_scalar(5.0, 3.0, 1.0) == 3.0);
    CHECK(truncate_scalar(-5.0, 3.0, 2.0) == -2.0);
    CHECK(truncate_scalar(0.5, 3.0, 2.0) == 0.5);
  }
  SUBCASE("bounded driver is untouched once the caps clear the bound") {
    const auto g = make_generator("sin_y");
    const auto tr = truncate(g, 2.0, 2.0);
    for (double y : {-2.0, -0.3, 0.0, 1.0, 2.5})
      CHECK(tr(0.0, v1(0.0), y, v1(0.0)) == g(0.0, v1(0.0), y, v1(0.0)));
  }
  SUBCASE("sandwich and pointwise convergence") {
    const auto g = make_generator("composite_example");
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> unif(-6.0, 6.0);
    for (int trial = 0; trial < 50; ++trial) {
      const double t = 0.5, y = unif(rng);
      const Vec x = v1(unif(rng)), z = v1(unif(rng));
      const double raw = g(t, x, y, z);
      double prev = -std::numeric_limits<double>::infinity();
      for (double cap : {1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0}) {
        const double v = truncate(g, cap, cap)(t, x, y, z);
        CHECK(v <= cap + 1e-15);
        CHECK(v >= -cap - 1e-15);
        if (raw >= 0.0) CHECK(v >= prev - 1e-15);
        prev = v;
      }
      CHECK(truncate(g, 4096.0, 4096.0)(t, x, y, z) == doctest::Approx(raw));
    }
  }
  SUBCASE("terminal sample truncation is monotone in the caps") {
    Vec xi(3);
    xi << 5.0, -5.0, 0.25;
    const Vec a = truncate_terminal(xi, 3.0, 1.0);
    CHECK(a(0) == 3.0);
    CHECK(a(1) == -1.0);
    CHECK(a(2) == 0.25);
    const Vec b = truncate_terminal(xi, 4.0, 1.0);
    for (int i = 0; i < 3; ++i) CHECK(b(i) >= a(i));
    const Vec c = truncate_terminal(xi, 3.0, 2.0);
    for (int i = 0; i < 3; ++i) CHECK(c(i) <= a(i));
  }
}

TEST_CASE("difference driver of the theta technique") {
  // frozen paths: two steps, three paths
  FrozenPaths primal, primed;
  primal.times = primed.times = Vec::LinSpaced(3, 0.0, 1.0);
  primal.y.resize(3, 3);
  primal.y << 0.1, -0.2, 0.4, 0.3, 0.0, -0.1, 0.2, 0.2, 0.2;
  primed.y = primal.y.array() + 0.5;
  primal.z.assign(2, Mat::Ones(1, 3) * 0.3);
  primed.z.assign(2, Mat::Ones(1, 3) * -0.2);

  SUBCASE("affine driver reduces to an exact shift") {
    const auto g = make_generator("affine", {{"a", 0.7}, {"b", -1.3}});
    auto gp = g;
    gp.eval = [g](double t, const Vec& x, double y, const Vec& z) {
      return g(t, x, y, z) + 0.25;
    };
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> unif(-2.0, 2.0);
    for (double theta : {0.1, 0.5, 0.9}) {
      const ThetaDifferenceGenerator dg(g, gp, theta, primal, primed,
                                        ThetaDifferenceGenerator::Mode::Convex);
      for (int trial = 0; trial < 20; ++trial) {
        const int i = trial % 2, j = trial % 3;
        const double y = unif(rng);
        const Vec z = v1(unif(rng));
        const double expected = g(0.0, v1(0.0), y, z) + theta / (1.0 - theta) * (-0.25);
        CHECK(dg.eval(i, j, 0.0, v1(0.0), y, z) == doctest::Approx(expected).epsilon(1e-12));
      }
    }
  }
  SUBCASE("theta near one recovers the driver along the frozen path") {
    const auto g = make_generator("abs_z_alpha");
    const ThetaDifferenceGenerator dg(g, g, 0.999, primal, primed,
                                      ThetaDifferenceGenerator::Mode::Convex);
    for (int j = 0; j < 3; ++j) {
      const double yp = primed.y(0, j);
      const Vec zp = primed.z[0].col(j);
      CHECK(std::abs(dg.eval(0, j, 0.0, v1(0.0), yp, zp) - g(0.0, v1(0.0), yp, zp)) < 1e-2);
    }
  }
  SUBCASE("convex driver keeps the one-sided growth bound at positive y") {
    const auto g = make_generator("abs_z_alpha");
    auto gp = g;
    gp.eval = [g](double t, const Vec& x, double y, const Vec& z) {
      return g(t, x, y, z) + 0.1;  // dominating driver
    };
    const auto d = g.declared;
    for (double theta : {0.25, 0.5, 0.9}) {
      const ThetaDifferenceGenerator dg(g, gp, theta, primal, primed,
                                        ThetaDifferenceGenerator::Mode::Convex);
      for (double y : {0.3, 1.0, 2.5})
        for (double zv : {-3.0, 0.0, 1.5}) {
          const double lhs = dg.eval(1, 0, 0.5, v1(0.0), y, v1(zv));
          const double rhs = d.beta * y + d.gamma * std::pow(std::abs(zv), d.alpha);
          CHECK(lhs <= rhs + 1e-12);
        }
    }
  }
  SUBCASE("misaligned paths are rejected") {
    FrozenPaths bad = primal;
    bad.z.pop_back();
    CHECK_THROWS_AS(ThetaDifferenceGenerator(make_generator("zero"), make_generator("zero"), 0.5,
                                             bad, primed, ThetaDifferenceGenerator::Mode::Convex),
                    std::invalid_argument);
  }
}

TEST_CASE("Lipschitz regularization by inf-convolution") {
  const InfConvParams box{6.0, 0.05};

  SUBCASE("a gentle driver is its own envelope") {
    // |sin y| has slope 1, well below both caps
    const auto g = make_generator("sin_y");
    const auto reg = inf_convolution(g, 3.0, 3.0, box);
    for (double y : {-2.0, -0.5, 0.0, 1.0, 2.0})
      for (double zv : {-1.0, 0.0, 2.0}) {
        const double expect = g(0.0, v1(0.0), y, v1(zv));
        CHECK(std::abs(reg(0.0, v1(0.0), y, v1(zv)) - expect) <= 2.0 * box.step * 3.0);
      }
  }
  SUBCASE("squared z against a dense one-dimensional scan") {
    const auto g = make_generator("quadratic_z");
    const auto reg = inf_convolution(g, 2.0, 2.0, box);
    for (double zv : {-3.0, -1.5, -0.4, 0.0, 0.7, 2.0, 3.5}) {
      double dense = std::numeric_limits<double>::infinity();
      for (int i = 0; i <= 240000; ++i) {
        const double zq = -6.0 + 12.0 * i / 240000.0 + zv;
        dense = std::min(dense, zq * zq + 2.0 * std::abs(zv - zq));
      }
      // tangent-line form: below |z| = 1 the parabola itself, beyond it 2|z| - 1
      const double closed = std::abs(zv) <= 1.0 ? zv * zv : 2.0 * std::abs(zv) - 1.0;
      CHECK(dense == doctest::Approx(closed).epsilon(1e-6));
      CHECK(reg(0.0, v1(0.0), 0.0, v1(zv)) == doctest::Approx(dense).epsilon(0.02));
    }
  }
  SUBCASE("monotone in the negative-part slope") {
    const auto g = make_generator("minus_y_cubed");
    const auto a = inf_convolution(g, 4.0, 2.0, box);
    const auto b = inf_convolution(g, 4.0, 4.0, box);
    for (double y : {-1.5, -0.5, 0.0, 0.8, 1.5})
      for (double zv : {-1.0, 0.5}) {
        CHECK(a(0.0, v1(0.0), y, v1(zv)) >= b(0.0, v1(0.0), y, v1(zv)) - 1e-9);
      }
  }
  SUBCASE("Lipschitz in both variables up to grid error") {
    const auto g = make_generator("quadratic_z");
    const auto reg = inf_convolution(g, 2.0, 2.0, box);
    for (double zv : {-2.0, 0.0, 1.0, 3.0}) {
      const double step = 0.25;
      const double d = std::abs(reg(0.0, v1(0.0), 0.0, v1(zv + step)) -
                                reg(0.0, v1(0.0), 0.0, v1(zv)));
      CHECK(d <= 2.0 * step + 4.0 * box.step);
    }
  }
  SUBCASE("boundary hits are counted for queries near the box edge") {
    auto stats = std::make_shared<InfConvStats>();
    MarkovGenerator steep;  // not xt-independent, forces the direct scan
    steep.eval = [](double, const Vec& x, double y, const Vec& z) {
      return 100.0 - 50.0 * (y + z(0)) + 0.0 * x.sum();
    };
    steep.declared = {1.5, 0.0, 1.0};
    const auto reg = inf_convolution(steep, 2.0, 2.0, InfConvParams{1.0, 0.1}, stats);
    (void)reg(0.0, v1(0.0), 0.0, v1(0.0));
    CHECK(stats->queries > 0);
    CHECK(stats->boundary_hits > 0);  // the minimizer runs off to the edge
  }
}

TEST_CASE("registry names resolve and unknown names are rejected") {
  for (const auto& name : generator_names()) CHECK(make_generator(name).eval != nullptr);
  for (const auto& name : terminal_names()) CHECK(make_terminal(name) != nullptr);
  CHECK_THROWS_AS(make_generator("no_such"), std::invalid_argument);
  CHECK_THROWS_AS(make_terminal("no_such"), std::invalid_argument);
  CHECK(make_terminal("cos")(v1(0.0)) == 1.0);
  CHECK(make_terminal("constant", {{"c", 2.0}})(v1(9.0)) == 2.0);
  CHECK(make_terminal("abs_pow", {{"p", 1.2}})(v1(-2.0)) ==
        doctest::Approx(std::pow(2.0, 1.2)));
}
