#include <cmath>
#include <limits>
#include <stdexcept>

#include <boost/math/distributions/normal.hpp>

#include "pex/exclusion.hpp"
#include "pex/parallel.hpp"
#include "pex/semigroup.hpp"
#include "pex/stats.hpp"

namespace pex {

namespace {

// (mean - expected) / stderr; exact agreement of a zero-variance sample is 0
double standardized(const RunningStats& s, double expected) {
  const double diff = s.mean() - expected;
  const double se = s.stderr_mean();
  if (se > 0.0) return diff / se;
  return std::fabs(diff) <= 1e-12 ? 0.0 : std::numeric_limits<double>::infinity();
}

// Same for samples confined to [0,1]. A constant sample v is scored by the
// chance of that event: P(X != v) >= |mu - v| / max(v, 1 - v), so
// P(all equal) <= (1 - q)^R, reported as the equivalent two-sided z.
double standardized_unit(const RunningStats& s, double expected) {
  if (s.stderr_mean() > 0.0) return standardized(s, expected);
  const double v = s.mean();
  const double q = std::min(1.0, std::fabs(v - expected) / std::max(v, 1.0 - v));
  if (q == 0.0) return 0.0;
  const double log_p = static_cast<double>(s.count()) * std::log1p(-q);
  if (q >= 1.0 || log_p < -700.0) return std::numeric_limits<double>::infinity();
  const double p = std::min(1.0, std::exp(log_p));
  if (p >= 1.0) return 0.0;
  return boost::math::quantile(boost::math::complement(boost::math::normal(), 0.5 * p));
}

double two_sample_z(const RunningStats& a, const RunningStats& b) {
  const double se = std::hypot(a.stderr_mean(), b.stderr_mean());
  const double diff = a.mean() - b.mean();
  if (se > 0.0) return diff / se;
  return std::fabs(diff) <= 1e-12 ? 0.0 : std::numeric_limits<double>::infinity();
}

void merge_into(std::vector<RunningStats>& acc, const std::vector<RunningStats>& part) {
  if (acc.empty()) acc.resize(part.size());
  for (std::size_t i = 0; i < part.size(); ++i) acc[i].merge(part[i]);
}

}  // namespace

nlohmann::json CheckReport::to_json() const {
  nlohmann::json j = {{"name", name},
                      {"cases", cases},
                      {"max_residual", max_residual},
                      {"threshold", threshold},
                      {"pass", pass}};
  if (!details.empty()) j["details"] = details;
  return j;
}

CheckReport reversibility_check(const Environment& env, double p,
                                std::uint64_t samples, std::uint64_t seed,
                                double threshold) {
  if (!(p > 0.0 && p < 1.0))
    throw std::invalid_argument("reversibility_check: p must lie in (0, 1)");
  CheckReport rep;
  rep.name = "reversibility";
  rep.threshold = threshold;
  Rng rng(seed);
  const Torus& tor = env.torus;
  ParticleConfig cfg(static_cast<std::size_t>(env.size()), 0);
  std::uint64_t frozen = 0;
  for (std::uint64_t s = 0; s < samples; ++s) {
    // the measure is a product, so drawing the two sites involved is enough
    const Site x = static_cast<Site>(rng.below(static_cast<std::uint64_t>(env.size())));
    const int k = static_cast<int>(rng.below(static_cast<std::uint64_t>(tor.degree())));
    const Site y = tor.neighbor(x, k);
    for (Site z : {x, y}) {
      cfg[z] = 0;
      for (int i = 0; i < env[z]; ++i) cfg[z] += rng.bernoulli(p);
    }
    const auto fwd = move_rate(env, cfg, x, y);
    const ParticleConfig moved = apply_move(env, cfg, x, y);
    const auto bwd = move_rate(env, moved, y, x);
    ++rep.cases;
    if (fwd == 0) {
      // eta^{x,y} = eta, both sides vanish
      ++frozen;
      for (Site z : {x, y}) cfg[z] = 0;
      continue;
    }
    const std::vector<Site> sites{x, y};
    const double l0 = log_binomial_mass(env, cfg, p, sites);
    const double l1 = log_binomial_mass(env, moved, p, sites);
    const double lhs = std::exp(l0) * static_cast<double>(fwd);
    const double rhs = std::exp(l1) * static_cast<double>(bwd);
    const double rel = std::fabs(lhs - rhs) / std::max(lhs, rhs);
    rep.max_residual = std::max(rep.max_residual, rel);
    for (Site z : {x, y}) cfg[z] = 0;
  }
  rep.pass = rep.max_residual <= threshold;
  rep.details = {{"p", p}, {"frozen_moves", frozen}, {"env_hash", env.hash()}};
  return rep;
}

CheckReport mean_density_evolution_check(const Environment& env,
                                         const ParticleConfig& cfg0,
                                         const std::vector<double>& t_grid,
                                         std::uint64_t replicas, std::uint64_t seed,
                                         double threshold) {
  check_config(env, cfg0);
  for (std::size_t i = 1; i < t_grid.size(); ++i)
    if (t_grid[i] < t_grid[i - 1])
      throw std::invalid_argument("mean_density_evolution_check: t_grid must be sorted");
  const std::size_t n = static_cast<std::size_t>(env.size());
  const std::size_t nt = t_grid.size();

  auto parts = map_chunks<std::vector<RunningStats>>(
      replicas, [&](std::size_t b, std::size_t e) {
        std::vector<RunningStats> acc(nt * n);
        for (std::size_t r = b; r < e; ++r) {
          DirectSep sim(env, cfg0, derive_seed(seed, r));
          for (std::size_t i = 0; i < nt; ++i) {
            sim.advance_to(t_grid[i]);
            const auto& c = sim.config();
            for (std::size_t x = 0; x < n; ++x)
              acc[i * n + x].push(static_cast<double>(c[x]) / env[static_cast<Site>(x)]);
          }
        }
        return acc;
      });
  std::vector<RunningStats> stats;
  for (const auto& p : parts) merge_into(stats, p);

  std::vector<double> f0(n);
  for (std::size_t x = 0; x < n; ++x)
    f0[x] = static_cast<double>(cfg0[x]) / env[static_cast<Site>(x)];
  const auto exact = semigroup_apply(make_generator(env, WalkKind::alpha_walk), f0, t_grid);

  CheckReport rep;
  rep.name = "mean_density_evolution";
  rep.threshold = threshold;
  nlohmann::json per_t = nlohmann::json::array();
  for (std::size_t i = 0; i < nt; ++i) {
    double worst = 0.0;
    for (std::size_t x = 0; x < n; ++x) {
      const double z = std::fabs(standardized_unit(stats[i * n + x], exact[i][x]));
      worst = std::max(worst, z);
      ++rep.cases;
    }
    rep.max_residual = std::max(rep.max_residual, worst);
    per_t.push_back({{"t", t_grid[i]}, {"max_abs_z", worst}});
  }
  rep.pass = rep.max_residual <= threshold;
  rep.details = {{"replicas", replicas}, {"per_t", per_t}, {"env_hash", env.hash()}};
  return rep;
}

namespace {

struct PairAcc {
  RunningStats d, d_alt, prod, bracket, bracket_alt, mx, my;
};

struct CovTracker {
  const Environment& env;
  std::vector<Site> sites;                     // tracked sites
  std::vector<std::pair<int, int>> pair_index; // indices into sites
  std::vector<int> kind;                       // 0 diagonal, 1 adjacent, 2 other
  std::vector<double> integral, drift;
  std::vector<double> bracket, bracket_alt, rate, rate_alt;
  double last = 0.0;

  double f(const ParticleConfig& c, Site z) const {
    return static_cast<double>(c[z]) / env[z];
  }

  double drift_at(const ParticleConfig& c, Site z) const {
    const Torus& tor = env.torus;
    double s = 0.0;
    for (int k = 0; k < tor.degree(); ++k) {
      const Site w = tor.neighbor(z, k);
      s += env[w] * (f(c, w) - f(c, z));
    }
    return s;
  }

  // bond traffic eta_x(alpha_y - eta_y) + eta_y(alpha_x - eta_x)
  double traffic(const ParticleConfig& c, Site x, Site y) const {
    return static_cast<double>(c[x]) * (env[y] - c[y]) +
           static_cast<double>(c[y]) * (env[x] - c[x]);
  }

  double square_gap(const ParticleConfig& c, Site x, Site y) const {
    const double g = f(c, x) - f(c, y);
    return static_cast<double>(env[x]) * env[y] * g * g;
  }

  void recompute(const ParticleConfig& c) {
    const Torus& tor = env.torus;
    for (std::size_t i = 0; i < sites.size(); ++i) drift[i] = drift_at(c, sites[i]);
    for (std::size_t p = 0; p < pair_index.size(); ++p) {
      const Site x = sites[pair_index[p].first], y = sites[pair_index[p].second];
      double r = 0.0, ra = 0.0;
      if (kind[p] == 0) {
        for (int k = 0; k < tor.degree(); ++k) {
          const Site w = tor.neighbor(x, k);
          r += traffic(c, x, w);
          ra += square_gap(c, x, w);
        }
        r /= static_cast<double>(env[x]) * env[x];
      } else if (kind[p] == 1) {
        // on a side-2 torus x and y may be joined by two bonds
        int mult = 0;
        for (int k = 0; k < tor.degree(); ++k) mult += tor.neighbor(x, k) == y;
        r = -mult * traffic(c, x, y) / (static_cast<double>(env[x]) * env[y]);
        ra = -mult * square_gap(c, x, y);
      }
      rate[p] = r;
      rate_alt[p] = ra;
    }
  }

  void integrate_to(double t) {
    const double dt = t - last;
    for (std::size_t i = 0; i < sites.size(); ++i) integral[i] += drift[i] * dt;
    for (std::size_t p = 0; p < pair_index.size(); ++p) {
      bracket[p] += rate[p] * dt;
      bracket_alt[p] += rate_alt[p] * dt;
    }
    last = t;
  }
};

}  // namespace

CovariationReport martingale_covariation_check(
    const Environment& env, const ParticleConfig& cfg0,
    const std::vector<std::pair<Site, Site>>& pairs, double t,
    std::uint64_t replicas, std::uint64_t seed, double threshold) {
  check_config(env, cfg0);
  std::vector<Site> sites;
  std::vector<std::pair<int, int>> pidx;
  std::vector<int> kind;
  auto site_index = [&](Site z) {
    for (std::size_t i = 0; i < sites.size(); ++i)
      if (sites[i] == z) return static_cast<int>(i);
    sites.push_back(z);
    return static_cast<int>(sites.size() - 1);
  };
  for (auto [x, y] : pairs) {
    if (x < 0 || y < 0 || x >= env.size() || y >= env.size())
      throw std::out_of_range("martingale_covariation_check: bad site");
    pidx.emplace_back(site_index(x), site_index(y));
    kind.push_back(x == y ? 0 : (env.torus.adjacent(x, y) ? 1 : 2));
  }
  const std::size_t np = pairs.size();

  auto parts = map_chunks<std::vector<PairAcc>>(replicas, [&](std::size_t b, std::size_t e) {
    std::vector<PairAcc> acc(np);
    for (std::size_t r = b; r < e; ++r) {
      CovTracker tr{env, sites, pidx, kind,
                    std::vector<double>(sites.size(), 0.0), std::vector<double>(sites.size(), 0.0),
                    std::vector<double>(np, 0.0), std::vector<double>(np, 0.0),
                    std::vector<double>(np, 0.0), std::vector<double>(np, 0.0)};
      DirectSep sim(env, cfg0, derive_seed(seed, r));
      tr.recompute(cfg0);
      sim.advance_to(t, [&](double s, Site, Site) {
        tr.integrate_to(s);
        tr.recompute(sim.config());
      });
      tr.integrate_to(t);
      const auto& c = sim.config();
      std::vector<double> m(sites.size());
      for (std::size_t i = 0; i < sites.size(); ++i)
        m[i] = tr.f(c, sites[i]) - tr.f(cfg0, sites[i]) - tr.integral[i];
      for (std::size_t p = 0; p < np; ++p) {
        const double prod = m[pidx[p].first] * m[pidx[p].second];
        acc[p].d.push(prod - tr.bracket[p]);
        acc[p].d_alt.push(prod - tr.bracket_alt[p]);
        acc[p].prod.push(prod);
        acc[p].bracket.push(tr.bracket[p]);
        acc[p].bracket_alt.push(tr.bracket_alt[p]);
        acc[p].mx.push(m[pidx[p].first]);
        acc[p].my.push(m[pidx[p].second]);
      }
    }
    return acc;
  });
  std::vector<PairAcc> acc(np);
  for (const auto& part : parts)
    for (std::size_t p = 0; p < np; ++p) {
      acc[p].d.merge(part[p].d);
      acc[p].d_alt.merge(part[p].d_alt);
      acc[p].prod.merge(part[p].prod);
      acc[p].bracket.merge(part[p].bracket);
      acc[p].bracket_alt.merge(part[p].bracket_alt);
      acc[p].mx.merge(part[p].mx);
      acc[p].my.merge(part[p].my);
    }

  CovariationReport rep;
  rep.summary.name = "martingale_covariation";
  rep.summary.threshold = threshold;
  nlohmann::json rows = nlohmann::json::array();
  double worst_alt = 0.0, worst_mean = 0.0;
  for (std::size_t p = 0; p < np; ++p) {
    CovariationResult r;
    r.x = pairs[p].first;
    r.y = pairs[p].second;
    r.adjacent = kind[p] == 1;
    r.mean_product = acc[p].prod.mean();
    r.mean_bracket = acc[p].bracket.mean();
    r.mean_bracket_alt = acc[p].bracket_alt.mean();
    r.z = standardized(acc[p].d, 0.0);
    r.z_alt = standardized(acc[p].d_alt, 0.0);
    r.z_mean_x = standardized(acc[p].mx, 0.0);
    r.z_mean_y = standardized(acc[p].my, 0.0);
    rep.summary.max_residual = std::max(rep.summary.max_residual, std::fabs(r.z));
    worst_alt = std::max(worst_alt, std::fabs(r.z_alt));
    worst_mean = std::max({worst_mean, std::fabs(r.z_mean_x), std::fabs(r.z_mean_y)});
    ++rep.summary.cases;
    rows.push_back({{"x", r.x},
                    {"y", r.y},
                    {"adjacent", r.adjacent},
                    {"mean_product", r.mean_product},
                    {"mean_bracket", r.mean_bracket},
                    {"z", r.z},
                    {"mean_bracket_alt", r.mean_bracket_alt},
                    {"z_alt", r.z_alt},
                    {"z_mean_x", r.z_mean_x},
                    {"z_mean_y", r.z_mean_y}});
    rep.pairs.push_back(r);
  }
  rep.summary.pass = rep.summary.max_residual <= threshold && worst_mean <= threshold;
  rep.summary.details = {{"t", t},
                         {"replicas", replicas},
                         {"max_abs_z_alt_form", worst_alt},
                         {"max_abs_z_martingale_mean", worst_mean},
                         {"pairs", rows},
                         {"env_hash", env.hash()}};
  return rep;
}

CheckReport ladder_equivalence_check(const Environment& env, const ParticleConfig& cfg0,
                                     double t, std::uint64_t replicas,
                                     std::uint64_t seed, double threshold) {
  check_config(env, cfg0);
  const std::size_t n = static_cast<std::size_t>(env.size());
  const LadderConfig lad0 = LadderConfig::lift(env, cfg0);
  auto run = [&](bool ladder) {
    auto parts = map_chunks<std::vector<RunningStats>>(
        replicas, [&](std::size_t b, std::size_t e) {
          std::vector<RunningStats> acc(n);
          for (std::size_t r = b; r < e; ++r) {
            const auto s = derive_seed(seed, ladder ? 1 : 0, r);
            ParticleConfig c;
            if (ladder) {
              LadderSep sim(env, lad0, s);
              sim.advance_to(t);
              c = sim.config();
            } else {
              DirectSep sim(env, cfg0, s);
              sim.advance_to(t);
              c = sim.config();
            }
            for (std::size_t x = 0; x < n; ++x) acc[x].push(c[x]);
          }
          return acc;
        });
    std::vector<RunningStats> stats;
    for (const auto& p : parts) merge_into(stats, p);
    return stats;
  };
  const auto direct = run(false);
  const auto ladder = run(true);
  CheckReport rep;
  rep.name = "ladder_equivalence";
  rep.threshold = threshold;
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t x = 0; x < n; ++x) {
    const double z = two_sample_z(direct[x], ladder[x]);
    rep.max_residual = std::max(rep.max_residual, std::fabs(z));
    ++rep.cases;
    rows.push_back({{"site", x},
                    {"direct_mean", direct[x].mean()},
                    {"ladder_mean", ladder[x].mean()},
                    {"z", z}});
  }
  rep.pass = rep.max_residual <= threshold;
  rep.details = {{"t", t}, {"replicas", replicas}, {"sites", rows}, {"env_hash", env.hash()}};
  return rep;
}

}  // namespace pex
