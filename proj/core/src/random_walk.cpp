#include "pex/random_walk.hpp"

#include <algorithm>
#include <ostream>
#include <stdexcept>

#include "pex/parallel.hpp"
#include "pex/rng.hpp"

namespace pex {

std::string to_string(WalkKind k) {
  return k == WalkKind::alpha_walk ? "alpha_walk" : "omega_walk";
}

WalkKind walk_kind_from_string(const std::string& s) {
  if (s == "alpha_walk" || s == "alpha") return WalkKind::alpha_walk;
  if (s == "omega_walk" || s == "omega") return WalkKind::omega_walk;
  throw std::invalid_argument("unknown walk kind '" + s + "'");
}

std::int64_t holding_rate(const Environment& env, Site x, WalkKind kind) {
  std::int64_t s = 0;
  for (int k = 0; k < env.torus.degree(); ++k) s += env[env.torus.neighbor(x, k)];
  return kind == WalkKind::alpha_walk ? s : s * env[x];
}

std::vector<double> jump_distribution(const Environment& env, Site x) {
  const double lam = static_cast<double>(holding_rate(env, x));
  std::vector<double> r(static_cast<std::size_t>(env.torus.degree()));
  for (int k = 0; k < env.torus.degree(); ++k)
    r[k] = env[env.torus.neighbor(x, k)] / lam;
  return r;
}

// ---------------------------------------------------------------- Trajectory

Site Trajectory::position_at(double t) const {
  auto it = std::upper_bound(
      events.begin(), events.end(), t,
      [](double v, const WalkEvent& e) { return v < e.time; });
  return it == events.begin() ? start : std::prev(it)->site;
}

std::vector<int> Trajectory::displacement_at(double t, std::size_t d) const {
  std::vector<int> disp(d, 0);
  for (const auto& e : events) {
    if (e.time > t) break;
    disp[Torus::axis(e.slot)] += Torus::step(e.slot);
  }
  return disp;
}

void Trajectory::validate(const Torus& torus) const {
  double prev = 0.0;
  Site at = start;
  for (const auto& e : events) {
    if (!(e.time > prev) || e.time > horizon)
      throw std::invalid_argument("trajectory: event times not increasing in (0, horizon]");
    if (torus.neighbor(at, e.slot) != e.site)
      throw std::invalid_argument("trajectory: jump between non-neighbors");
    prev = e.time;
    at = e.site;
  }
}

// ---------------------------------------------------------------- Walker

Walker::Walker(const Environment& env, WalkKind kind, Site x0, std::uint64_t seed)
    : env_(&env), kind_(kind), x_(x0), disp_(env.dim(), 0), rng_(seed) {
  if (x0 < 0 || x0 >= env.size()) throw std::out_of_range("walker: bad start site");
  draw_next();
}

void Walker::draw_next() {
  next_ = t_ + rng_.exponential(static_cast<double>(holding_rate(*env_, x_, kind_)));
}

std::uint64_t Walker::advance_to(double t, std::vector<WalkEvent>* record) {
  const Torus& tor = env_->torus;
  const int deg = tor.degree();
  std::uint64_t n = 0;
  while (next_ <= t) {
    t_ = next_;
    // pick slot k with probability alpha_{y_k} / sum, in exact integers
    std::int64_t tot = 0;
    for (int k = 0; k < deg; ++k) tot += (*env_)[tor.neighbor(x_, k)];
    std::int64_t u = static_cast<std::int64_t>(rng_.below(static_cast<std::uint64_t>(tot)));
    int k = 0;
    for (;; ++k) {
      u -= (*env_)[tor.neighbor(x_, k)];
      if (u < 0) break;
    }
    x_ = tor.neighbor(x_, k);
    disp_[Torus::axis(k)] += Torus::step(k);
    ++jumps_;
    ++n;
    if (record) record->push_back({t_, x_, k});
    draw_next();
  }
  t_ = t;
  return n;
}

Trajectory simulate_walk(const Environment& env, WalkKind kind, Site x0,
                         double horizon, std::uint64_t seed) {
  if (!(horizon > 0.0)) throw std::invalid_argument("simulate_walk: horizon must be > 0");
  Trajectory tr;
  tr.start = x0;
  tr.horizon = horizon;
  Walker w(env, kind, x0, seed);
  w.advance_to(horizon, &tr.events);
  return tr;
}

Trajectory time_change(const Trajectory& traj, const Environment& env) {
  // On [t_j, t_{j+1}) R(t) = a_j t - D_j with a_j the current alpha and
  // D_j = sum_{i<=j} (a_i - a_{i-1}) t_i. For constant alpha this is exactly m t.
  Trajectory out;
  out.start = traj.start;
  out.events.reserve(traj.events.size());
  double prev = 0.0, shift = 0.0;
  double a = env[traj.start];
  for (const auto& e : traj.events) {
    if (!(e.time > prev))
      throw std::invalid_argument("time_change: event times are not increasing");
    const double an = env[e.site];
    shift += (an - a) * e.time;
    a = an;
    out.events.push_back({a * e.time - shift, e.site, e.slot});
    prev = e.time;
  }
  if (traj.horizon < prev)
    throw std::invalid_argument("time_change: horizon precedes last event");
  out.horizon = a * traj.horizon - shift;
  return out;
}

void write_trajectories_csv(std::ostream& os, const std::vector<Trajectory>& trajs) {
  os << "replica,event_index,time,site\n";
  os.precision(17);
  for (std::size_t r = 0; r < trajs.size(); ++r) {
    os << r << ",0,0," << trajs[r].start << "\n";
    for (std::size_t i = 0; i < trajs[r].events.size(); ++i)
      os << r << "," << i + 1 << "," << trajs[r].events[i].time << ","
         << trajs[r].events[i].site << "\n";
  }
}

}  // namespace pex

namespace pex {

nlohmann::json TimeChangeReport::to_json() const {
  nlohmann::json tests_j = nlohmann::json::array();
  for (std::size_t k = 0; k < tests.size(); ++k)
    tests_j.push_back({{"t", times[k]},
                       {"statistic", tests[k].statistic},
                       {"dof", tests[k].dof},
                       {"p_value", tests[k].p_value}});
  return {{"tests", tests_j}, {"replicas", replicas}, {"level", level},
          {"min_p", min_p},   {"pass", pass}};
}

TimeChangeReport time_change_equivalence(const Environment& env, Site x0,
                                         const std::vector<double>& t_grid,
                                         std::uint64_t replicas, std::uint64_t seed,
                                         double level) {
  if (t_grid.empty() || !std::is_sorted(t_grid.begin(), t_grid.end()) || !(t_grid.front() > 0.0))
    throw std::invalid_argument("time_change_equivalence: need sorted positive times");
  const std::size_t n = static_cast<std::size_t>(env.size());
  const std::size_t nt = t_grid.size();
  struct Hist {
    std::vector<std::uint64_t> a, b;  // [t][site]
  };
  const auto parts = map_chunks<Hist>(replicas, [&](std::size_t lo, std::size_t hi) {
    Hist h;
    h.a.assign(nt * n, 0);
    h.b.assign(nt * n, 0);
    for (std::size_t r = lo; r < hi; ++r) {
      Walker w(env, WalkKind::alpha_walk, x0, derive_seed(seed, 0, r));
      for (std::size_t k = 0; k < nt; ++k) {
        w.advance_to(t_grid[k]);
        ++h.a[k * n + static_cast<std::size_t>(w.site())];
      }
      // alpha >= 1 gives R(t) >= t
      const auto tc = time_change(
          simulate_walk(env, WalkKind::omega_walk, x0, t_grid.back(), derive_seed(seed, 1, r)),
          env);
      for (std::size_t k = 0; k < nt; ++k)
        ++h.b[k * n + static_cast<std::size_t>(tc.position_at(t_grid[k]))];
    }
    return h;
  });
  TimeChangeReport rep;
  rep.times = t_grid;
  rep.replicas = replicas;
  rep.level = level;
  for (std::size_t k = 0; k < nt; ++k) {
    std::vector<std::uint64_t> a(n, 0), b(n, 0);
    for (const auto& h : parts)
      for (std::size_t x = 0; x < n; ++x) {
        a[x] += h.a[k * n + x];
        b[x] += h.b[k * n + x];
      }
    rep.tests.push_back(chi_square_two_sample(a, b));
    rep.min_p = std::min(rep.min_p, rep.tests.back().p_value);
  }
  rep.pass = rep.min_p > level;
  return rep;
}

}  // namespace pex
