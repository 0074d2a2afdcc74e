#include <doctest.h>

#include <cmath>
#include <functional>
#include <sstream>

#include "pex/exclusion.hpp"
#include "pex/random_walk.hpp"
#include "pex/stats.hpp"

using namespace pex;

namespace {

// falling factorial n (n-1) ... (n-k+1)
double ff(int n, int k) {
  double r = 1.0;
  for (int i = 0; i < k; ++i) r *= n - i;
  return r;
}

double dual_fn(const Environment& env, const ParticleConfig& xi, const ParticleConfig& eta) {
  double r = 1.0;
  for (Site x = 0; x < env.size(); ++x) {
    if (xi[x] > eta[x]) return 0.0;
    r *= ff(eta[x], xi[x]) / ff(env[x], xi[x]);
  }
  return r;
}

// L f(eta) by enumeration of every directed move
double generator(const Environment& env, const ParticleConfig& eta,
                 const std::function<double(const ParticleConfig&)>& f) {
  const double f0 = f(eta);
  double s = 0.0;
  for (Site x = 0; x < env.size(); ++x)
    for (int k = 0; k < env.torus.degree(); ++k) {
      const Site y = env.torus.neighbor(x, k);
      const auto rate = static_cast<double>(eta[x]) * (env[y] - eta[y]);
      if (rate == 0.0) continue;
      auto m = eta;
      --m[x];
      ++m[y];
      s += rate * (f(m) - f0);
    }
  return s;
}

double brute_residual(const Environment& env, const ParticleConfig& xi, const ParticleConfig& eta,
                      const std::function<double(const Environment&, const ParticleConfig&,
                                                 const ParticleConfig&)>& d) {
  const double lhs = generator(env, xi, [&](const ParticleConfig& z) { return d(env, z, eta); });
  const double rhs = generator(env, eta, [&](const ParticleConfig& z) { return d(env, xi, z); });
  return std::fabs(lhs - rhs);
}

}  // namespace

TEST_SUITE("exclusion") {
  TEST_CASE("apply_move rules") {
    const Environment env({4}, {2, 2, 1, 3});
    const ParticleConfig c{2, 0, 1, 0};
    CHECK(apply_move(env, c, 0, 1) == ParticleConfig{1, 1, 1, 0});
    CHECK(apply_move(env, c, 1, 2) == c);  // source empty
    CHECK(apply_move(env, c, 3, 2) == c);  // source empty
    CHECK(apply_move(env, ParticleConfig{0, 1, 1, 0}, 1, 2) == ParticleConfig{0, 1, 1, 0});  // target full
    CHECK_THROWS_AS(apply_move(env, c, 0, 2), std::invalid_argument);
    CHECK_THROWS(check_config(env, ParticleConfig{3, 0, 0, 0}));
  }

  TEST_CASE("sum tree selection") {
    SumTree t(5);
    const std::int64_t w[5] = {3, 0, 2, 5, 1};
    for (int i = 0; i < 5; ++i) t.set(i, w[i]);
    CHECK(t.total() == 11);
    std::vector<std::size_t> expect{0, 0, 0, 2, 2, 3, 3, 3, 3, 3, 4};
    for (std::int64_t u = 0; u < 11; ++u) CHECK(t.find(u) == expect[u]);
    t.set(3, 0);
    CHECK(t.total() == 6);
    CHECK(t.find(5) == 4);
  }

  TEST_CASE("ladder lift and projection") {
    const auto env = sample_environment(EnvLaw::iid({1, 2, 3}), {9}, 1);
    const auto cfg = binomial_measure_sampler(env, 0.6, 2);
    const auto lad = LadderConfig::lift(env, cfg);
    CHECK(lad.project() == cfg);
    for (Site x = 0; x < env.size(); ++x)
      for (int i = 0; i < env[x]; ++i) CHECK(lad.at(x, i) == (i < cfg[x] ? 1 : 0));
  }

  TEST_CASE("frozen configurations produce no events") {
    const auto env = sample_environment(EnvLaw::iid({1, 2}), {8, 4}, 5);
    const ParticleConfig full = env.alpha, empty(env.alpha.size(), 0);
    CHECK(simulate_sep_direct(env, full, 50.0, 1).events.empty());
    CHECK(simulate_sep_direct(env, empty, 50.0, 1).events.empty());
    CHECK(simulate_sep_ladder(env, LadderConfig::lift(env, full), 50.0, 1).events.empty());
  }

  TEST_CASE("conservation and occupancy bounds along paths") {
    const auto env = sample_environment(EnvLaw::iid({1, 2, 3}), {7, 6}, 3);
    const auto cfg = binomial_measure_sampler(env, 0.4, 8);
    const auto a = simulate_sep_direct(env, cfg, 5.0, 9);
    const auto b = simulate_sep_ladder(env, LadderConfig::lift(env, cfg), 5.0, 9);
    for (const auto* tr : {&a, &b}) {
      tr->validate(env);
      CHECK(!tr->events.empty());
      CHECK(particle_count(tr->config_at(env, 5.0)) == particle_count(cfg));
    }
    // reproducible
    CHECK(simulate_sep_direct(env, cfg, 5.0, 9).events.size() == a.events.size());
  }

  TEST_CASE("a single particle is a random walk") {
    const auto env = sample_environment(EnvLaw::iid({1, 2, 3}), {10}, 4);
    ParticleConfig one(10, 0);
    one[0] = 1;
    std::vector<std::uint64_t> sep(10, 0), walk(10, 0), lad(10, 0);
    for (std::uint64_t r = 0; r < 100000; ++r) {
      DirectSep s(env, one, derive_seed(1, r));
      s.advance_to(1.0);
      for (Site x = 0; x < 10; ++x)
        if (s.config()[x]) ++sep[x];
      ++walk[simulate_walk(env, WalkKind::alpha_walk, 0, 1.0, derive_seed(2, r)).position_at(1.0)];
    }
    CHECK(chi_square_two_sample(sep, walk).p_value > 0.01);

    // ladder with alpha = 1 is classical stirring
    const auto ones = sample_environment(EnvLaw::constant(1), {10}, 0);
    std::fill(walk.begin(), walk.end(), 0);
    for (std::uint64_t r = 0; r < 100000; ++r) {
      LadderSep s(ones, LadderConfig::lift(ones, one), derive_seed(3, r));
      s.advance_to(1.0);
      const auto c = s.config();
      for (Site x = 0; x < 10; ++x)
        if (c[x]) ++lad[x];
      ++walk[simulate_walk(ones, WalkKind::alpha_walk, 0, 1.0, derive_seed(4, r)).position_at(1.0)];
    }
    CHECK(chi_square_two_sample(lad, walk).p_value > 0.01);
  }

  TEST_CASE("ladder and direct dynamics agree in mean") {
    const auto env = sample_environment(EnvLaw::iid({1, 2, 3}), {16}, 12);
    ParticleConfig step(16, 0);
    for (Site x = 0; x < 8; ++x) step[x] = env[x];
    const auto rep = ladder_equivalence_check(env, step, 1.0, 20000, 5);
    CHECK(rep.pass);
    CHECK(rep.cases == 16);
  }

  TEST_CASE("single-particle duality against brute force") {
    Rng rng(17);
    for (int c = 0; c < 40; ++c) {
      const std::vector<int> dims = c % 2 ? std::vector<int>{8} : std::vector<int>{3, 4};
      const auto env = sample_environment(EnvLaw::iid({1, 2, 3}), dims, rng());
      const auto eta = binomial_measure_sampler(env, rng.uniform(), rng());
      const Site x = static_cast<Site>(rng.below(env.size()));
      CHECK(duality_check(env, eta, x).max_abs_residual <= 1e-12);
      ParticleConfig xi(eta.size(), 0);
      xi[x] = 1;
      CHECK(brute_residual(env, xi, eta, dual_fn) <= 1e-12);
    }
  }

  TEST_CASE("harmonic ratio field gives vanishing sides") {
    const auto env = sample_environment(EnvLaw::iid({2, 4}), {8}, 2);
    ParticleConfig half(8);
    for (Site x = 0; x < 8; ++x) half[x] = env[x] / 2;
    const auto rep = duality_check(env, half, 3);
    CHECK(rep.max_abs_residual == 0.0);
    CHECK(rep.lhs == 0.0);
  }

  TEST_CASE("product duality against brute force") {
    Rng rng(23);
    for (int c = 0; c < 50; ++c) {
      const auto env = sample_environment(EnvLaw::iid({1, 2, 3}), {6}, rng());
      const auto eta = binomial_measure_sampler(env, rng.uniform(), rng());
      ParticleConfig xi(6, 0);
      const int k = 1 + static_cast<int>(rng.below(3));
      for (int j = 0; j < k; ++j) {
        const Site x = static_cast<Site>(rng.below(6));
        if (xi[x] < env[x]) ++xi[x];
      }
      CHECK(duality_function(env, xi, eta) == doctest::Approx(dual_fn(env, xi, eta)).epsilon(1e-15));
      CHECK(multi_duality_check(env, xi, eta).max_abs_residual <= 1e-12);
      CHECK(brute_residual(env, xi, eta, dual_fn) <= 1e-12);
    }
    // two adjacent dual particles, alpha = 2, L = 6
    const auto twos = sample_environment(EnvLaw::constant(2), {6}, 0);
    const ParticleConfig xi{0, 1, 1, 0, 0, 0}, eta{2, 1, 0, 2, 1, 1};
    CHECK(multi_duality_check(twos, xi, eta).max_abs_residual <= 1e-12);
    CHECK(brute_residual(twos, xi, eta, dual_fn) <= 1e-12);
    // the oracle has power: independent powers (eta/alpha)^xi are not self-dual
    const auto wrong = [](const Environment& e, const ParticleConfig& a, const ParticleConfig& b) {
      double r = 1.0;
      for (Site x = 0; x < e.size(); ++x) r *= std::pow(static_cast<double>(b[x]) / e[x], a[x]);
      return r;
    };
    const auto threes = sample_environment(EnvLaw::constant(3), {6}, 0);
    const ParticleConfig x2{0, 2, 0, 0, 0, 0}, e2{3, 1, 0, 2, 1, 1};
    CHECK(brute_residual(threes, x2, e2, dual_fn) <= 1e-12);
    CHECK(brute_residual(threes, x2, e2, wrong) > 1e-3);
    const auto env = sample_environment(EnvLaw::iid({1, 2, 3}), {6}, 99);
    // rejected when xi exceeds alpha
    ParticleConfig over(6, 0);
    over[0] = env[0] + 1;
    CHECK_THROWS(multi_duality_check(env, over, binomial_measure_sampler(env, 0.5, 1)));
  }

  TEST_CASE("binomial sampler") {
    const auto env = sample_environment(EnvLaw::iid({1, 2, 3}), {8}, 7);
    CHECK(binomial_measure_sampler(env, 1.0, 1) == env.alpha);
    CHECK(particle_count(binomial_measure_sampler(env, 0.0, 1)) == 0);
    CHECK_THROWS_AS(binomial_measure_sampler(env, 1.5, 1), std::invalid_argument);
    std::vector<RunningStats> s(8);
    for (std::uint64_t r = 0; r < 100000; ++r) {
      const auto c = binomial_measure_sampler(env, 0.3, derive_seed(5, r));
      for (Site x = 0; x < 8; ++x) s[x].push(c[x]);
    }
    for (Site x = 0; x < 8; ++x) CHECK(std::fabs(s[x].mean() - 0.3 * env[x]) < 3 * s[x].stderr_mean());
    const auto ones = sample_environment(EnvLaw::constant(1), {8}, 0);
    for (int v : binomial_measure_sampler(ones, 0.5, 3)) CHECK((v == 0 || v == 1));
  }

  TEST_CASE("reversibility of product Binomial measures") {
    const auto ones = sample_environment(EnvLaw::constant(1), {12}, 0);
    const auto a = reversibility_check(ones, 0.3, 5000, 1, 1e-12);
    CHECK(a.pass);
    const auto env = sample_environment(EnvLaw::iid({1, 2, 3, 4}), {6, 6}, 5);
    const auto b = reversibility_check(env, 0.7, 10000, 2);
    CHECK(b.pass);
    CHECK(b.cases == 10000);
    CHECK(b.max_residual <= 1e-10);
  }

  TEST_CASE("mean density follows the walk semigroup") {
    const auto env = sample_environment(EnvLaw::iid({1, 2}), {12}, 9);
    ParticleConfig step(12, 0);
    for (Site x = 0; x < 6; ++x) step[x] = env[x];
    const auto zero = mean_density_evolution_check(env, step, {0.0}, 100, 1);
    CHECK(zero.max_residual == 0.0);
    const auto rep = mean_density_evolution_check(env, step, {0.5, 1.0}, 20000, 3);
    CHECK(rep.pass);

    // deep inside a long full block nothing moves in any replica: the exact
    // mean sits a hair below 1 and the constant sample must not be rejected
    const auto flat = sample_environment(EnvLaw::constant(1), {64}, 0);
    ParticleConfig block(64, 0);
    for (Site x = 0; x < 40; ++x) block[x] = 1;
    const auto frozen = mean_density_evolution_check(flat, block, {0.3}, 2000, 4);
    CHECK(frozen.pass);
  }

  TEST_CASE("stationary start keeps the mean density") {
    const auto env = sample_environment(EnvLaw::iid({1, 2, 3}), {10}, 2);
    RunningStats s;
    for (std::uint64_t r = 0; r < 20000; ++r) {
      DirectSep sep(env, binomial_measure_sampler(env, 0.35, derive_seed(8, r)), derive_seed(9, r));
      sep.advance_to(1.5);
      double m = 0.0;
      for (Site x = 0; x < 10; ++x) m += static_cast<double>(sep.config()[x]) / env[x];
      s.push(m / 10);
    }
    CHECK(std::fabs(s.mean() - 0.35) < 3 * s.stderr_mean());
  }

  TEST_CASE("martingale covariations") {
    const auto env = sample_environment(EnvLaw::iid({1, 2, 3}), {8}, 4);
    const ParticleConfig full = env.alpha;
    const auto frozen = martingale_covariation_check(env, full, {{0, 1}, {0, 3}}, 1.0, 50, 1);
    for (const auto& p : frozen.pairs) {
      CHECK(p.mean_product == 0.0);
      CHECK(p.mean_bracket == 0.0);
    }
    const auto cfg = binomial_measure_sampler(env, 0.5, 3);
    const auto rep =
        martingale_covariation_check(env, cfg, {{2, 3}, {0, 0}, {1, 5}, {4, 5}}, 1.0, 20000, 7);
    CHECK(rep.summary.pass);
    for (const auto& p : rep.pairs) {
      CHECK(std::fabs(p.z) <= 4.0);
      CHECK(std::fabs(p.z_mean_x) <= 4.0);
      if (!p.adjacent && p.x != p.y) CHECK(p.mean_bracket == 0.0);
    }
  }

  TEST_CASE("sep csv") {
    const auto env = sample_environment(EnvLaw::constant(1), {4}, 0);
    std::ostringstream os;
    write_sep_csv(os, {simulate_sep_direct(env, ParticleConfig{1, 0, 1, 0}, 1.0, 2)});
    CHECK(os.str().rfind("replica,time,from_site,to_site\n", 0) == 0);
  }
}
