#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <unordered_set>
#include <vector>

#include "pex/parallel.hpp"
#include "pex/rng.hpp"
#include "pex/stats.hpp"

using namespace pex;

TEST_SUITE("rng_stats") {
  TEST_CASE("rng streams are reproducible and seed-sensitive") {
    Rng a(42), b(42), c(43);
    for (int i = 0; i < 100; ++i) {
      const auto x = a();
      CHECK(x == b());
      (void)c();
    }
    CHECK(Rng(42)() != Rng(43)());
  }

  TEST_CASE("derive_seed has no collisions over a million replica indices") {
    std::unordered_set<std::uint64_t> seen;
    seen.reserve(2'000'000);
    for (std::uint64_t r = 0; r < 1'000'000; ++r) seen.insert(derive_seed(7, 1, 2, r));
    CHECK(seen.size() == 1'000'000);
  }

  TEST_CASE("below(n) is uniform") {
    Rng rng(5);
    std::vector<std::uint64_t> a(10, 0), b(10, 0);
    for (int i = 0; i < 200000; ++i) ++a[rng.below(10)];
    // reference: exact expected counts as the second "sample"
    for (auto& v : b) v = 20000;
    CHECK(chi_square_two_sample(a, b).p_value > 1e-3);
    for (int i = 0; i < 1000; ++i) CHECK(rng.below(3) < 3);
  }

  TEST_CASE("exponential mean and uniform range") {
    Rng rng(9);
    RunningStats s;
    for (int i = 0; i < 200000; ++i) s.push(rng.exponential(4.0));
    CHECK(std::fabs(s.mean() - 0.25) < 4 * s.stderr_mean());
    for (int i = 0; i < 1000; ++i) {
      const double u = rng.uniform();
      CHECK(u >= 0.0);
      CHECK(u < 1.0);
    }
  }

  TEST_CASE("compensated sum recovers cancelled digits") {
    std::vector<double> xs{1e16, 1.0, -1e16, 1.0};
    CHECK(compensated_sum(xs) == 2.0);
    KahanSum k;
    for (int i = 0; i < 10; ++i) k += 0.1;
    CHECK(k.value() == doctest::Approx(1.0).epsilon(1e-16));
  }

  TEST_CASE("running stats merge equals a single pass") {
    Rng rng(1);
    RunningStats all, left, right;
    for (int i = 0; i < 1000; ++i) {
      const double x = rng.uniform() * 3 - 1;
      all.push(x);
      (i < 400 ? left : right).push(x);
    }
    left.merge(right);
    CHECK(left.count() == all.count());
    CHECK(left.mean() == doctest::Approx(all.mean()).epsilon(1e-13));
    CHECK(left.variance() == doctest::Approx(all.variance()).epsilon(1e-12));
    RunningStats one;
    one.push(3.0);
    CHECK(one.variance() == 0.0);
  }

  TEST_CASE("running covariance") {
    RunningCov c;
    for (int i = 0; i < 10; ++i) c.push(i, 2.0 * i + 1.0);
    // var(0..9) = 55/6
    CHECK(c.covariance() == doctest::Approx(2.0 * 55.0 / 6.0));
  }

  TEST_CASE("linear fit of an exact line") {
    std::vector<double> x{0, 1, 2, 3, 4}, y;
    for (double v : x) y.push_back(3.0 - 0.5 * v);
    const auto f = linear_fit(x, y);
    CHECK(f.slope == doctest::Approx(-0.5));
    CHECK(f.intercept == doctest::Approx(3.0));
    CHECK(f.r2 == doctest::Approx(1.0));
  }

  TEST_CASE("chi-square tail and two-sample test") {
    CHECK(chi_square_sf(3.841458820694124, 1) == doctest::Approx(0.05).epsilon(1e-9));
    CHECK(chi_square_sf(0.0, 4) == doctest::Approx(1.0));
    std::vector<std::uint64_t> a{100, 200, 300}, b{100, 200, 300};
    const auto r = chi_square_two_sample(a, b);
    CHECK(r.statistic == doctest::Approx(0.0));
    CHECK(r.dof == 2);
    CHECK(r.p_value == doctest::Approx(1.0));
    std::vector<std::uint64_t> c{300, 200, 100};
    CHECK(chi_square_two_sample(a, c).p_value < 1e-10);
  }

  TEST_CASE("parallel map is independent of the thread count") {
    auto work = [] {
      return map_chunks<double>(1000, [](std::size_t b, std::size_t e) {
        KahanSum s;
        for (std::size_t i = b; i < e; ++i) s += 1.0 / (1.0 + static_cast<double>(i));
        return s.value();
      });
    };
    set_threads(1);
    const auto a = work();
    set_threads(4);
    const auto b = work();
    set_threads(1);
    CHECK(a == b);
  }
}
