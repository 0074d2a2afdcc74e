#include <doctest.h>

#include <cmath>
#include <sstream>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "pex/rng.hpp"
#include "pex/semigroup.hpp"

using namespace pex;

namespace {

Eigen::MatrixXd dense_generator(const GeneratorMatrix& g) {
  const auto n = static_cast<Eigen::Index>(g.size());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (Site x = 0; x < g.size(); ++x) {
    for (int k = 0; k < g.torus.degree(); ++k) a(x, g.torus.neighbor(x, k)) += static_cast<double>(g.q(x, k));
    a(x, x) -= static_cast<double>(g.exit[x]);
  }
  return a;
}

double max_diff(const SemigroupTable& t, const Eigen::MatrixXd& e) {
  double m = 0.0;
  for (Site x = 0; x < t.n; ++x)
    for (Site y = 0; y < t.n; ++y) m = std::max(m, std::fabs(t(x, y) - e(x, y)));
  return m;
}

}  // namespace

TEST_SUITE("semigroup") {
  TEST_CASE("generator rows vanish and rates follow the walk kind") {
    const auto env = sample_environment(EnvLaw::iid({1, 2, 3}), {5, 4}, 2);
    for (auto kind : {WalkKind::alpha_walk, WalkKind::omega_walk}) {
      const auto g = make_generator(env, kind);
      CHECK(g.row_sum_residual() == 0);
      for (Site x = 0; x < env.size(); ++x)
        for (int k = 0; k < 4; ++k) {
          const Site y = env.torus.neighbor(x, k);
          CHECK(g.q(x, k) == (kind == WalkKind::alpha_walk ? env[y] : env[x] * env[y]));
        }
    }
  }

  TEST_CASE("uniformization against a dense matrix exponential") {
    for (const auto& dims : {std::vector<int>{12}, std::vector<int>{4, 4}}) {
      const auto env = sample_environment(EnvLaw::iid({1, 2, 3}), dims, 6);
      for (auto kind : {WalkKind::alpha_walk, WalkKind::omega_walk}) {
        const auto g = make_generator(env, kind);
        const Eigen::MatrixXd a = dense_generator(g);
        for (double t : {0.1, 1.0, 3.0}) {
          const Eigen::MatrixXd e = (a * t).exp();
          CHECK(max_diff(semigroup(g, t), e) < 1e-9);
          CHECK(max_diff(semigroup(g, t, 1e-10, SemigroupMethod::scaling_squaring), e) < 1e-9);
        }
      }
    }
  }

  TEST_CASE("identity at zero, reversibility, rows, Chapman-Kolmogorov") {
    const auto env = sample_environment(EnvLaw::iid({1, 2}), {16}, 3);
    const auto g = make_generator(env, WalkKind::alpha_walk);
    const auto id = semigroup(g, 0.0);
    for (Site x = 0; x < id.n; ++x)
      for (Site y = 0; y < id.n; ++y) CHECK(id(x, y) == (x == y ? 1.0 : 0.0));
    for (double t : {0.5, 1.0, 2.0}) {
      const auto tab = semigroup(g, t);
      CHECK(tab.row_sum_residual() <= 10 * kDefaultTol);
      CHECK(tab.reversibility_residual(env) <= 10 * kDefaultTol);
      CHECK(chapman_kolmogorov_residual(env, t, 0.5 * t) <= 100 * kDefaultTol);
    }
    CHECK_THROWS_AS(semigroup(g, 1.0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(semigroup(g, -1.0), std::invalid_argument);
  }

  TEST_CASE("vector actions agree with the dense table") {
    const auto env = sample_environment(EnvLaw::iid({1, 2, 3}), {6, 5}, 8);
    const auto g = make_generator(env, WalkKind::alpha_walk);
    Rng rng(1);
    std::vector<double> f(static_cast<std::size_t>(env.size()));
    for (auto& v : f) v = rng.uniform();
    const auto right = semigroup_apply(g, f, {0.0, 0.7, 2.0});
    const auto left = semigroup_apply_left(g, f, {0.7});
    CHECK(right[0] == f);
    const auto tab = semigroup(g, 0.7);
    for (Site x = 0; x < env.size(); ++x) {
      double r = 0.0, l = 0.0;
      for (Site y = 0; y < env.size(); ++y) {
        r += tab(x, y) * f[y];
        l += f[y] * tab(y, x);
      }
      CHECK(right[1][x] == doctest::Approx(r).epsilon(1e-9));
      CHECK(left[0][x] == doctest::Approx(l).epsilon(1e-9));
    }
  }

  TEST_CASE("poisson weights") {
    const auto w = poisson_weights(50.0, 1e-12);
    double s = 0.0;
    for (double v : w) s += v;
    CHECK(s >= 1.0 - 1e-12);
    CHECK(s <= 1.0 + 1e-12);
    CHECK(w[50] == doctest::Approx(std::exp(50 * std::log(50.0) - 50.0 - std::lgamma(51.0))));
  }

  TEST_CASE("heat kernel symmetry and initial condition") {
    const auto env = sample_environment(EnvLaw::iid({1, 2, 3}), {10}, 4);
    for (Site x = 0; x < 10; ++x) {
      CHECK(heat_kernel(env, 0.0, x, x) == doctest::Approx(1.0 / env[x]));
      CHECK(heat_kernel(env, 0.0, x, (x + 3) % 10) == 0.0);
      for (Site y = 0; y < 10; ++y)
        CHECK(std::fabs(heat_kernel(env, 1.3, x, y) - heat_kernel(env, 1.3, y, x)) <= 10 * kDefaultTol);
    }
  }

  TEST_CASE("heat-kernel bound constant is stable across tori") {
    std::vector<double> cs;
    for (int l : {64, 128, 256}) {
      const auto env = sample_environment(EnvLaw::constant(1), {l}, 0);
      const auto rep = heat_kernel_bound_check(env, {1.0});
      CHECK(std::isfinite(rep.c));
      cs.push_back(rep.c);
    }
    CHECK(cs[1] == doctest::Approx(cs[0]).epsilon(0.05));
    CHECK(cs[2] == doctest::Approx(cs[0]).epsilon(0.05));
    // oracle on Z: p_1(0,k) = e^{-2} I_k(2), bound constant max_k e^{k} p_1(0,k)
    double best = 0.0;
    for (int k = 0; k < 30; ++k) best = std::max(best, std::exp(k - 2.0) * std::cyl_bessel_i(static_cast<double>(k), 2.0));
    CHECK(cs[2] == doctest::Approx(best).epsilon(1e-6));
  }

  TEST_CASE("Dirichlet form and Nash ratio") {
    const auto ones = sample_environment(EnvLaw::constant(1), {8}, 0);
    std::vector<double> ind(8, 0.0);
    ind[3] = 1.0;
    CHECK(dirichlet_form(ones, ind) == doctest::Approx(2.0));
    CHECK(dirichlet_form(ones, std::vector<double>(8, 4.0)) == 0.0);
    const auto env = sample_environment(EnvLaw::iid({1, 2, 3}), {8}, 5);
    Rng rng(3);
    for (int i = 0; i < 20; ++i) {
      std::vector<double> f(8);
      for (auto& v : f) v = rng.uniform() - 0.5;
      CHECK(dirichlet_form(env, f) >= dirichlet_form(ones, f));
      CHECK(nash_ratio(env, f) > 0.0);
    }
    CHECK_THROWS_AS(nash_ratio(env, std::vector<double>(8, 0.0)), std::invalid_argument);
    CHECK(inner_alpha(env, std::vector<double>(8, 1.0), std::vector<double>(8, 1.0)) ==
          doctest::Approx(env.empirical_mean() * 8));
  }

  TEST_CASE("dense output is capped") {
    const auto env = sample_environment(EnvLaw::constant(1), {65, 64}, 0);
    CHECK_THROWS_AS(semigroup(make_generator(env, WalkKind::alpha_walk), 1.0), std::invalid_argument);
  }

  TEST_CASE("table csv header") {
    const auto env = sample_environment(EnvLaw::constant(1), {3}, 0);
    std::ostringstream os;
    semigroup(make_generator(env, WalkKind::alpha_walk), 0.5).write_csv(os);
    CHECK(os.str().rfind("t,size,tol", 0) == 0);
  }
}
