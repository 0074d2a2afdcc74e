#include <doctest.h>

#include <cmath>

#include "pex/environment.hpp"
#include "pex/stats.hpp"

using namespace pex;

TEST_SUITE("environment") {
  TEST_CASE("torus indexing and neighbors") {
    const Torus t({4, 5});
    CHECK(t.size() == 20);
    for (Site x = 0; x < t.size(); ++x) {
      CHECK(t.index(t.coords(x)) == x);
      for (int k = 0; k < t.degree(); ++k) {
        const Site y = t.neighbor(x, k);
        CHECK(t.neighbor(y, Torus::reverse(k)) == x);
        CHECK(t.distance(x, y) == 1);
      }
    }
    CHECK(t.index({-1, 0}) == t.index({3, 0}));
    // last coordinate fastest
    CHECK(t.coords(1) == std::vector<int>{0, 1});
    CHECK(t.distance(t.index({0, 0}), t.index({2, 3})) == 4);
    CHECK(t.euclidean_distance(t.index({0, 0}), t.index({3, 4})) == doctest::Approx(std::sqrt(2.0)));
    CHECK(t.slot_of(0, 7) == -1);
  }

  TEST_CASE("constant law gives a flat field") {
    const auto env = sample_environment(EnvLaw::constant(1), {8}, 3);
    for (int a : env.alpha) CHECK(a == 1);
    env.check_ellipticity();
  }

  TEST_CASE("iid law: mean and determinism") {
    const auto law = EnvLaw::iid({1, 2});
    const auto env = sample_environment(law, {1000000}, 17);
    // stderr of the mean is 0.5 / 1000
    CHECK(std::fabs(env.empirical_mean() - 1.5) < 0.002);
    CHECK(sample_environment(law, {1000000}, 17) == env);
    CHECK(sample_environment(law, {1000000}, 18).hash() != env.hash());
    for (int a : env.alpha) {
      CHECK(a >= 1);
      CHECK(a <= 2);
    }
  }

  TEST_CASE("markov law: lag-1 autocorrelation equals the second eigenvalue") {
    const auto law = EnvLaw::parse("markov:1,2|0.9,0.1;0.1,0.9");
    CHECK(law.mean() == doctest::Approx(1.5));
    const auto env = sample_environment(law, {1000000}, 5);
    RunningCov c;
    RunningStats s;
    for (Site x = 0; x + 1 < env.size(); ++x) {
      c.push(env[x], env[x + 1]);
      s.push(env[x]);
    }
    CHECK(c.covariance() / s.variance() == doctest::Approx(0.8).epsilon(0.0125));
  }

  TEST_CASE("law validation") {
    CHECK_THROWS_AS(EnvLaw::iid({1, 2}, {0.5, 0.6}).validate(), std::invalid_argument);
    CHECK_THROWS_AS(EnvLaw::iid({0, 2}).validate(), std::invalid_argument);
    CHECK_THROWS_AS(EnvLaw::parse("markov:1,2|0.9,0.2;0.1,0.9").validate(), std::invalid_argument);
    CHECK_THROWS_AS(EnvLaw::markov({1, 2}, {{0.9, 0.1}, {0.1, 0.9}}, {0.7, 0.3}).validate(),
                    std::invalid_argument);
    CHECK_THROWS_AS(EnvLaw::parse("poisson:3"), std::invalid_argument);
    const auto w = EnvLaw::parse("iid:1,3@0.25,0.75");
    CHECK(w.mean() == doctest::Approx(2.5));
    CHECK(w.mean_inverse() == doctest::Approx(0.25 + 0.25));
    CHECK(EnvLaw::from_json(w.to_json()).mean() == w.mean());
    CHECK_THROWS_AS(Environment({4}, {1, 2, 0, 1}).check_ellipticity(), std::domain_error);
  }

  TEST_CASE("conductances") {
    const Environment env({3}, {2, 3, 1});
    const auto cf = conductances(env);
    CHECK(cf.bond_values() == std::vector<std::int64_t>{6, 3, 2});
    const auto big = sample_environment(EnvLaw::iid({1, 2, 3}), {6, 7}, 2);
    const auto bf = conductances(big);
    for (Site x = 0; x < big.size(); ++x)
      for (int k = 0; k < big.torus.degree(); ++k) {
        const Site y = big.torus.neighbor(x, k);
        CHECK(bf(x, k) == bf(y, Torus::reverse(k)));
        CHECK(bf(x, k) == big[x] * big[y]);
        CHECK(bf(x, k) >= 1);
        CHECK(bf(x, k) <= 9);
      }
  }

  TEST_CASE("ergodic averages") {
    const TestFunction f(BumpKind::cosine_bump, {0.5}, 0.25, 4.0);  // integral 1
    const auto ones = sample_environment(EnvLaw::constant(1), {256}, 0);
    CHECK(ergodic_average(ones, f, 256) == doctest::Approx(1.0).epsilon(1e-6));
    const auto twos = sample_environment(EnvLaw::constant(2), {256}, 0);
    CHECK(ergodic_average(twos, f, 256) == doctest::Approx(2.0 * ergodic_average(ones, f, 256)));
    RunningStats s;
    for (std::uint64_t seed = 0; seed < 50; ++seed)
      s.push(ergodic_average(sample_environment(EnvLaw::iid({1, 2}), {512}, seed), f, 512));
    CHECK(std::fabs(s.mean() - 1.5) < 0.05);
    CHECK_THROWS_AS(ergodic_average(ones, f, 1024), std::invalid_argument);
  }

  TEST_CASE("ergodic average deviation shrinks with N") {
    const TestFunction f(BumpKind::cosine_bump, {0.5}, 0.25, 4.0);
    std::vector<RunningStats> dev(4);
    const int ns[4] = {64, 128, 256, 512};
    for (int i = 0; i < 4; ++i)
      for (std::uint64_t seed = 0; seed < 50; ++seed)
        dev[i].push(std::fabs(
            ergodic_average(sample_environment(EnvLaw::iid({1, 2}), {ns[i]}, 1000 + seed), f, ns[i]) -
            1.5));
    for (int i = 1; i < 4; ++i)
      CHECK(dev[i].mean() <=
            dev[i - 1].mean() + 2 * std::hypot(dev[i].stderr_mean(), dev[i - 1].stderr_mean()));
  }

  TEST_CASE("translations") {
    const auto env = sample_environment(EnvLaw::iid({1, 2, 3}), {5, 6}, 9);
    CHECK(translate(env, {0, 0}) == env);
    CHECK(translate(env, {5, 6}) == env);
    CHECK(translate(translate(env, {2, -1}), {-2, 1}) == env);
    const auto s = translate(env, {1, 0});
    CHECK(s.alpha[0] == env[env.torus.index({1, 0})]);
  }

  TEST_CASE("json round trip keeps exact integers") {
    const auto env = sample_environment(EnvLaw::iid({1, 2}), {7, 3}, 4);
    const auto back = Environment::from_json(env.to_json());
    CHECK(back == env);
    CHECK(back.hash() == env.hash());
  }
}
