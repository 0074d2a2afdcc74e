#include "pex/exclusion.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace pex {

void check_config(const Environment& env, const ParticleConfig& cfg) {
  if (static_cast<Site>(cfg.size()) != env.size())
    throw std::invalid_argument("configuration has wrong length");
  for (Site x = 0; x < env.size(); ++x)
    if (cfg[x] < 0 || cfg[x] > env[x])
      throw std::invalid_argument("configuration: eta(" + std::to_string(x) +
                                  ") = " + std::to_string(cfg[x]) +
                                  " outside [0, alpha_x = " +
                                  std::to_string(env[x]) + "]");
}

std::int64_t particle_count(const ParticleConfig& cfg) {
  std::int64_t s = 0;
  for (int v : cfg) s += v;
  return s;
}

std::uint64_t config_hash(const ParticleConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (int v : cfg) {
    h ^= static_cast<std::uint64_t>(static_cast<std::uint32_t>(v));
    h *= 0x100000001b3ULL;
  }
  return h;
}

ParticleConfig apply_move(const Environment& env, const ParticleConfig& cfg,
                          Site x, Site y) {
  if (!env.torus.adjacent(x, y))
    throw std::invalid_argument("apply_move: sites are not nearest neighbors");
  ParticleConfig out = cfg;
  if (out[x] >= 1 && out[y] < env[y]) {
    --out[x];
    ++out[y];
  }
  return out;
}

// ---------------------------------------------------------------- ladder

LadderConfig LadderConfig::lift(const Environment& env, const ParticleConfig& cfg) {
  check_config(env, cfg);
  LadderConfig l;
  l.offset.resize(static_cast<std::size_t>(env.size()) + 1, 0);
  for (Site x = 0; x < env.size(); ++x) l.offset[x + 1] = l.offset[x] + env[x];
  l.bits.assign(static_cast<std::size_t>(l.offset.back()), 0);
  for (Site x = 0; x < env.size(); ++x)
    for (int i = 0; i < cfg[x]; ++i) l.bits[l.offset[x] + i] = 1;
  return l;
}

ParticleConfig LadderConfig::project() const {
  ParticleConfig c(offset.size() - 1, 0);
  for (std::size_t x = 0; x + 1 < offset.size(); ++x)
    for (auto k = offset[x]; k < offset[x + 1]; ++k) c[x] += bits[k];
  return c;
}

// ---------------------------------------------------------------- trajectories

ParticleConfig SepTrajectory::config_at(const Environment& env, double t) const {
  ParticleConfig c = initial;
  for (const auto& e : events) {
    if (e.time > t) break;
    c = apply_move(env, c, e.from, e.to);
  }
  return c;
}

void SepTrajectory::validate(const Environment& env) const {
  ParticleConfig c = initial;
  check_config(env, c);
  const auto n0 = particle_count(c);
  double prev = 0.0;
  for (const auto& e : events) {
    if (!(e.time > prev) || e.time > horizon)
      throw std::invalid_argument("sep trajectory: event times not increasing");
    if (c[e.from] < 1 || c[e.to] >= env[e.to])
      throw std::invalid_argument("sep trajectory: infeasible move");
    c = apply_move(env, c, e.from, e.to);
    prev = e.time;
  }
  check_config(env, c);
  if (particle_count(c) != n0)
    throw std::invalid_argument("sep trajectory: particle number changed");
}

void write_sep_csv(std::ostream& os, const std::vector<SepTrajectory>& trajs) {
  os << "replica,time,from_site,to_site\n";
  os.precision(17);
  for (std::size_t r = 0; r < trajs.size(); ++r)
    for (const auto& e : trajs[r].events)
      os << r << "," << e.time << "," << e.from << "," << e.to << "\n";
}

// ---------------------------------------------------------------- SumTree

SumTree::SumTree(std::size_t n) {
  while (base_ < n) base_ <<= 1;
  tree_.assign(2 * base_, 0);
}

void SumTree::set(std::size_t i, std::int64_t v) {
  std::size_t k = base_ + i;
  tree_[k] = v;
  for (k >>= 1; k >= 1; k >>= 1) tree_[k] = tree_[2 * k] + tree_[2 * k + 1];
}

std::size_t SumTree::find(std::int64_t u) const {
  std::size_t k = 1;
  while (k < base_) {
    const std::size_t l = 2 * k;
    if (u < tree_[l]) {
      k = l;
    } else {
      u -= tree_[l];
      k = l + 1;
    }
  }
  return k - base_;
}

// ---------------------------------------------------------------- DirectSep

DirectSep::DirectSep(const Environment& env, ParticleConfig cfg0, std::uint64_t seed)
    : env_(&env),
      eta_(std::move(cfg0)),
      tree_(static_cast<std::size_t>(env.size()) * env.torus.degree()),
      rng_(seed) {
  check_config(env, eta_);
  const int deg = env.torus.degree();
  for (Site x = 0; x < env.size(); ++x)
    for (int k = 0; k < deg; ++k)
      tree_.set(static_cast<std::size_t>(x * deg + k),
                move_rate(env, eta_, x, env.torus.neighbor(x, k)));
  draw_next();
}

void DirectSep::refresh(Site z) {
  const Torus& tor = env_->torus;
  const int deg = tor.degree();
  for (int k = 0; k < deg; ++k) {
    const Site w = tor.neighbor(z, k);
    tree_.set(static_cast<std::size_t>(z * deg + k), move_rate(*env_, eta_, z, w));
    tree_.set(static_cast<std::size_t>(w * deg + Torus::reverse(k)),
              move_rate(*env_, eta_, w, z));
  }
}

void DirectSep::draw_next() {
  const std::int64_t tot = tree_.total();
  next_ = tot > 0 ? t_ + rng_.exponential(static_cast<double>(tot))
                  : std::numeric_limits<double>::infinity();
}

std::pair<Site, Site> DirectSep::select() {
  const int deg = env_->torus.degree();
  const auto leaf = tree_.find(
      static_cast<std::int64_t>(rng_.below(static_cast<std::uint64_t>(tree_.total()))));
  const Site x = static_cast<Site>(leaf) / deg;
  return {x, env_->torus.neighbor(x, static_cast<int>(leaf % deg))};
}

void DirectSep::move(Site x, Site y) {
  --eta_[x];
  ++eta_[y];
  refresh(x);
  refresh(y);
}

// ---------------------------------------------------------------- LadderSep

LadderSep::LadderSep(const Environment& env, LadderConfig ladder0, std::uint64_t seed)
    : env_(&env), lad_(std::move(ladder0)), rng_(seed) {
  if (static_cast<Site>(lad_.offset.size()) != env.size() + 1)
    throw std::invalid_argument("ladder configuration does not match environment");
  for (Site x = 0; x < env.size(); ++x)
    if (lad_.offset[x + 1] - lad_.offset[x] != env[x])
      throw std::invalid_argument("ladder configuration does not match environment");
  const ConductanceField cf = conductances(env);
  bonds_ = cf.bonds();
  std::int64_t acc = 0;
  for (auto w : cf.bond_values()) cum_.push_back(acc += w);
  next_ = acc > 0 ? rng_.exponential(static_cast<double>(acc))
                  : std::numeric_limits<double>::infinity();
}

SepTrajectory simulate_sep_direct(const Environment& env, const ParticleConfig& cfg0,
                                  double horizon, std::uint64_t seed) {
  SepTrajectory tr;
  tr.initial = cfg0;
  tr.horizon = horizon;
  DirectSep sim(env, cfg0, seed);
  sim.advance_to(horizon, [&](double t, Site x, Site y) {
    tr.events.push_back({t, x, y});
  });
  return tr;
}

SepTrajectory simulate_sep_ladder(const Environment& env, const LadderConfig& ladder0,
                                  double horizon, std::uint64_t seed) {
  SepTrajectory tr;
  tr.initial = ladder0.project();
  tr.horizon = horizon;
  LadderSep sim(env, ladder0, seed);
  sim.advance_to(horizon, [&](double t, Site x, Site y) {
    tr.events.push_back({t, x, y});
  });
  return tr;
}

// ---------------------------------------------------------------- duality

void DualityReport::merge(const DualityReport& o) {
  const auto c = cases + o.cases;
  if (cases == 0 || o.max_abs_residual > max_abs_residual) *this = o;
  cases = c;
}

nlohmann::json DualityReport::to_json() const {
  return {{"max_abs_residual", max_abs_residual},
          {"cases", cases},
          {"worst_case",
           {{"env_hash", worst_env_hash},
            {"config_hash", worst_config_hash},
            {"site", worst_site},
            {"dual_hash", worst_dual_hash},
            {"lhs", lhs},
            {"rhs", rhs}}}};
}

DualityReport duality_check(const Environment& env, const ParticleConfig& cfg, Site x) {
  check_config(env, cfg);
  const Torus& tor = env.torus;
  // walk generator on f(y) = eta(y)/alpha_y, evaluated at x
  double lhs = 0.0;
  for (int k = 0; k < tor.degree(); ++k) {
    const Site y = tor.neighbor(x, k);
    lhs += env[y] * (static_cast<double>(cfg[y]) / env[y] -
                     static_cast<double>(cfg[x]) / env[x]);
  }
  // particle generator on eta -> eta(x)/alpha_x; only bonds at x matter
  double rhs = 0.0;
  const double d0 = static_cast<double>(cfg[x]) / env[x];
  for (int k = 0; k < tor.degree(); ++k) {
    const Site y = tor.neighbor(x, k);
    const auto out = move_rate(env, cfg, x, y);
    if (out > 0) rhs += out * ((cfg[x] - 1.0) / env[x] - d0);
    const auto in = move_rate(env, cfg, y, x);
    if (in > 0) rhs += in * ((cfg[x] + 1.0) / env[x] - d0);
  }
  DualityReport r;
  r.cases = 1;
  r.max_abs_residual = std::fabs(lhs - rhs);
  r.worst_env_hash = env.hash();
  r.worst_config_hash = config_hash(cfg);
  r.worst_site = x;
  r.lhs = lhs;
  r.rhs = rhs;
  return r;
}

namespace {

double falling(int a, int k) {
  double v = 1.0;
  for (int i = 0; i < k; ++i) v *= a - i;
  return v;
}

double local_duality(const Environment& env, const ParticleConfig& xi,
                     const ParticleConfig& eta, const std::vector<Site>& support) {
  double v = 1.0;
  for (Site x : support) {
    if (xi[x] == 0) continue;
    if (xi[x] > eta[x]) return 0.0;
    v *= falling(eta[x], xi[x]) / falling(env[x], xi[x]);
  }
  return v;
}

}  // namespace

double duality_function(const Environment& env, const ParticleConfig& xi,
                        const ParticleConfig& eta) {
  std::vector<Site> sup;
  for (Site x = 0; x < env.size(); ++x)
    if (xi[x] > 0) sup.push_back(x);
  return local_duality(env, xi, eta, sup);
}

DualityReport multi_duality_check(const Environment& env, const ParticleConfig& xi,
                                  const ParticleConfig& eta) {
  check_config(env, eta);
  if (static_cast<Site>(xi.size()) != env.size())
    throw std::invalid_argument("multi_duality_check: xi has wrong length");
  for (Site x = 0; x < env.size(); ++x)
    if (xi[x] < 0 || xi[x] > env[x])
      throw std::invalid_argument("multi_duality_check: xi(" + std::to_string(x) +
                                  ") exceeds alpha_x");
  if (particle_count(xi) > 4)
    throw std::invalid_argument("multi_duality_check: at most 4 dual particles");
  const Torus& tor = env.torus;
  std::vector<Site> sup;
  for (Site x = 0; x < env.size(); ++x)
    if (xi[x] > 0) sup.push_back(x);
  // sites whose moves can change D: support and its neighbors
  std::vector<Site> touched = sup;
  for (Site x : sup)
    for (int k = 0; k < tor.degree(); ++k) touched.push_back(tor.neighbor(x, k));
  std::sort(touched.begin(), touched.end());
  touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
  auto in_sup = [&](Site z) { return xi[z] > 0; };

  const double d0 = local_duality(env, xi, eta, sup);
  double lhs = 0.0;
  ParticleConfig x2 = xi;
  for (Site u : sup)
    for (int k = 0; k < tor.degree(); ++k) {
      const Site v = tor.neighbor(u, k);
      const auto r = move_rate(env, xi, u, v);
      if (r == 0) continue;
      --x2[u];
      ++x2[v];
      std::vector<Site> s2 = sup;
      if (!in_sup(v)) s2.push_back(v);
      lhs += r * (local_duality(env, x2, eta, s2) - d0);
      ++x2[u];
      --x2[v];
    }
  double rhs = 0.0;
  ParticleConfig e2 = eta;
  for (Site u : touched)
    for (int k = 0; k < tor.degree(); ++k) {
      const Site v = tor.neighbor(u, k);
      if (!in_sup(u) && !in_sup(v)) continue;
      const auto r = move_rate(env, eta, u, v);
      if (r == 0) continue;
      --e2[u];
      ++e2[v];
      rhs += r * (local_duality(env, xi, e2, sup) - d0);
      ++e2[u];
      --e2[v];
    }
  DualityReport rep;
  rep.cases = 1;
  rep.max_abs_residual = std::fabs(lhs - rhs);
  rep.worst_env_hash = env.hash();
  rep.worst_config_hash = config_hash(eta);
  rep.worst_dual_hash = config_hash(xi);
  rep.lhs = lhs;
  rep.rhs = rhs;
  return rep;
}

// ---------------------------------------------------------------- measures

ParticleConfig binomial_measure_sampler(const Environment& env, double p,
                                        std::uint64_t seed) {
  if (!(p >= 0.0 && p <= 1.0))
    throw std::invalid_argument("binomial sampler: p must lie in [0, 1]");
  Rng rng(seed);
  ParticleConfig c(static_cast<std::size_t>(env.size()), 0);
  for (Site x = 0; x < env.size(); ++x)
    for (int i = 0; i < env[x]; ++i) c[x] += rng.bernoulli(p);
  return c;
}

ParticleConfig binomial_measure_sampler(
    const Environment& env, const std::function<double(const double*)>& rho,
    double n, std::uint64_t seed) {
  Rng rng(seed);
  ParticleConfig c(static_cast<std::size_t>(env.size()), 0);
  std::vector<double> u(env.dim());
  for (Site x = 0; x < env.size(); ++x) {
    const auto cc = env.torus.coords(x);
    for (std::size_t i = 0; i < u.size(); ++i) u[i] = cc[i] / n;
    const double p = rho(u.data());
    if (!(p >= 0.0 && p <= 1.0))
      throw std::invalid_argument("binomial sampler: profile leaves [0, 1]");
    for (int i = 0; i < env[x]; ++i) c[x] += rng.bernoulli(p);
  }
  return c;
}

double log_binomial_mass(const Environment& env, const ParticleConfig& cfg,
                         double p, const std::vector<Site>& sites) {
  double s = 0.0;
  for (Site x : sites) {
    const int a = env[x], k = cfg[x];
    s += std::lgamma(a + 1.0) - std::lgamma(k + 1.0) - std::lgamma(a - k + 1.0);
    if (k > 0) s += k * std::log(p);
    if (a - k > 0) s += (a - k) * std::log1p(-p);
  }
  return s;
}

}  // namespace pex
