#include <doctest.h>

#include <cmath>
#include <numbers>

#include "pex/test_function.hpp"

using namespace pex;

namespace {

constexpr double kPi = std::numbers::pi;

// midpoint rule on the unit interval; spectrally accurate for smooth periodic f
template <class F>
double riemann_1d(F f, int m = 4000) {
  double s = 0.0;
  for (int k = 0; k < m; ++k) {
    const double u = (k + 0.5) / m;
    s += f(u);
  }
  return s / m;
}

template <class F>
double riemann_2d(F f, int m = 600) {
  double s = 0.0;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      const double u[2] = {(i + 0.5) / m, (j + 0.5) / m};
      s += f(u);
    }
  return s / (static_cast<double>(m) * m);
}

}  // namespace

TEST_SUITE("test_function") {
  TEST_CASE("closed-form integrals in d = 1") {
    const TestFunction g(BumpKind::gaussian_bump, {0.3}, 0.05, 2.0);
    CHECK(g.integral() == doctest::Approx(2.0 * 0.05 * std::sqrt(2 * kPi)).epsilon(1e-12));
    const TestFunction c(BumpKind::cosine_bump, {0.5}, 0.2);
    CHECK(c.integral() == doctest::Approx(0.2).epsilon(1e-14));
    const TestFunction p(BumpKind::polynomial_bump, {0.5}, 0.2, 3.0);
    CHECK(p.integral() == doctest::Approx(3.0 * 0.2 * 32.0 / 35.0).epsilon(1e-14));
    // independent quadrature
    for (const auto* f : {&g, &c, &p})
      CHECK(riemann_1d([&](double u) { return (*f)(u); }) ==
            doctest::Approx(f->integral()).epsilon(1e-9));
  }

  TEST_CASE("closed-form integrals in d = 2") {
    const TestFunction p(BumpKind::polynomial_bump, {0.5, 0.5}, 0.3);
    CHECK(p.integral() == doctest::Approx(kPi * 0.09 / 4.0).epsilon(1e-13));
    const TestFunction c(BumpKind::cosine_bump, {0.1, 0.9}, 0.3);
    CHECK(riemann_2d([&](const double* u) { return c(u); }) ==
          doctest::Approx(c.integral()).epsilon(1e-6));
    // tensor panels cut the support circle, so d = 2 quadrature is ~1e-9
    CHECK(c.integrate_against([](const double*) { return 1.0; }) ==
          doctest::Approx(c.integral()).epsilon(1e-8));
    const TestFunction c1(BumpKind::cosine_bump, {0.1}, 0.3);
    CHECK(c1.integrate_against([](const double*) { return 1.0; }) ==
          doctest::Approx(c1.integral()).epsilon(1e-13));
  }

  TEST_CASE("support and sup norm") {
    const TestFunction c(BumpKind::cosine_bump, {0.95}, 0.1, -2.0);
    CHECK(c(0.95) == doctest::Approx(-2.0));
    CHECK(c(0.02) != 0.0);  // wraps around the torus
    CHECK(c(0.5) == 0.0);
    CHECK(c.sup_norm() == doctest::Approx(2.0));
    CHECK(c.abs_integral() == doctest::Approx(0.2));
    CHECK_THROWS_AS(TestFunction(BumpKind::cosine_bump, {0.5}, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(TestFunction(BumpKind::gaussian_bump, {0.5}, 0.1), std::invalid_argument);
  }

  TEST_CASE("heat evolution: identity at zero, mass preserved, Gaussian closed form") {
    Matrix s(1, 2.0);
    const TestFunction g(BumpKind::gaussian_bump, {0.5}, 0.04);
    const double u = 0.53;
    CHECK(g.heat_evolved(s, 0.0, &u) == g(u));
    // unperiodized convolution of two centered Gaussians
    const double t = 0.001, var = 0.04 * 0.04 + 2.0 * t;
    const double ref = 0.04 / std::sqrt(var) * std::exp(-0.03 * 0.03 / (2 * var));
    CHECK(g.heat_evolved(s, t, &u) == doctest::Approx(ref).epsilon(1e-12));
    const TestFunction c(BumpKind::cosine_bump, {0.3}, 0.2);
    const double mass = riemann_1d([&](double v) { return c.heat_evolved(s, 0.01, &v); }, 400);
    CHECK(mass == doctest::Approx(c.integral()).epsilon(1e-8));
  }

  TEST_CASE("quadrature heat evolution matches direct convolution") {
    Matrix s(1, 1.5);
    const TestFunction c(BumpKind::polynomial_bump, {0.4}, 0.25);
    const double t = 0.02;
    const double u = 0.61;
    Matrix cov = s * t;
    const double direct = riemann_1d([&](double v) {
      const double du = u - v;
      return c(v) * periodized_gaussian(cov, &du);
    }, 20000);
    CHECK(c.heat_evolved(s, t, &u) == doctest::Approx(direct).epsilon(1e-7));
  }

  TEST_CASE("periodized Gaussian is a probability density") {
    Matrix c(1, 0.3);
    CHECK(riemann_1d([&](double u) { return periodized_gaussian(c, &u); }, 200) ==
          doctest::Approx(1.0).epsilon(1e-12));
    Matrix c2(2, 0.0);
    c2(0, 0) = 0.02;
    c2(1, 1) = 0.05;
    c2(0, 1) = c2(1, 0) = 0.01;
    CHECK(riemann_2d([&](const double* u) { return periodized_gaussian(c2, u); }, 200) ==
          doctest::Approx(1.0).epsilon(1e-10));
  }

  TEST_CASE("parse, label and json round trip") {
    const auto g = TestFunction::parse("cosine_bump:0.25,0.75:0.2:3", 2);
    CHECK(g.kind() == BumpKind::cosine_bump);
    CHECK(g.center()[1] == 0.75);
    CHECK(g.amplitude() == 3.0);
    const auto back = TestFunction::from_json(g.to_json());
    const double u[2] = {0.3, 0.7};
    CHECK(back(u) == g(u));
    CHECK(TestFunction::parse("constant:2", 1)(0.1) == 2.0);
    CHECK_THROWS_AS(TestFunction::parse("wavelet:0.5:0.1", 1), std::invalid_argument);
    CHECK_THROWS_AS(TestFunction::parse("cosine_bump:0.5", 1), std::invalid_argument);
    CHECK_FALSE(g.label().empty());
  }

  TEST_CASE("torus delta") {
    CHECK(torus_delta(0.9, 0.1) == doctest::Approx(-0.2));
    CHECK(torus_delta(0.1, 0.9) == doctest::Approx(0.2));
  }
}
