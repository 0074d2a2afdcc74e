#include <benchmark/benchmark.h>

#include "pex/environment.hpp"
#include "pex/exclusion.hpp"
#include "pex/random_walk.hpp"
#include "pex/semigroup.hpp"

namespace {

pex::Environment bench_env(int l, std::size_t d = 1) {
  return pex::sample_environment(pex::EnvLaw::iid({1, 2}), std::vector<int>(d, l), 11);
}

void BM_DirectSep(benchmark::State& st) {
  const auto env = bench_env(static_cast<int>(st.range(0)));
  const auto cfg = pex::binomial_measure_sampler(env, 0.5, 3);
  std::uint64_t events = 0, seed = 0;
  for (auto _ : st) {
    pex::DirectSep sep(env, cfg, ++seed);
    events += sep.advance_to(10.0);
  }
  st.counters["events/s"] = benchmark::Counter(static_cast<double>(events), benchmark::Counter::kIsRate);
}
BENCHMARK(BM_DirectSep)->Arg(64)->Arg(1024);

void BM_LadderSep(benchmark::State& st) {
  const auto env = bench_env(static_cast<int>(st.range(0)));
  const auto lad = pex::LadderConfig::lift(env, pex::binomial_measure_sampler(env, 0.5, 3));
  std::uint64_t rings = 0, seed = 0;
  for (auto _ : st) {
    pex::LadderSep sep(env, lad, ++seed);
    sep.advance_to(10.0);
    rings += sep.rings();
  }
  st.counters["rings/s"] = benchmark::Counter(static_cast<double>(rings), benchmark::Counter::kIsRate);
}
BENCHMARK(BM_LadderSep)->Arg(64)->Arg(1024);

void BM_Uniformization(benchmark::State& st) {
  const auto env = bench_env(static_cast<int>(st.range(0)));
  const auto gen = pex::make_generator(env, pex::WalkKind::alpha_walk);
  std::vector<double> f(static_cast<std::size_t>(env.size()), 0.0);
  f[0] = 1.0;
  for (auto _ : st) benchmark::DoNotOptimize(pex::semigroup_apply(gen, f, {100.0}));
}
BENCHMARK(BM_Uniformization)->Arg(256)->Arg(4096);

void BM_Walk(benchmark::State& st) {
  const auto env = bench_env(256, 2);
  std::uint64_t jumps = 0, seed = 0;
  for (auto _ : st) {
    pex::Walker w(env, pex::WalkKind::alpha_walk, 0, ++seed);
    jumps += w.advance_to(1000.0);
  }
  st.counters["jumps/s"] = benchmark::Counter(static_cast<double>(jumps), benchmark::Counter::kIsRate);
}
BENCHMARK(BM_Walk);

}  // namespace

BENCHMARK_MAIN();
