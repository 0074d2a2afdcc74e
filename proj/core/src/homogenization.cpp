#include "pex/homogenization.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "pex/parallel.hpp"
#include "pex/random_walk.hpp"
#include "pex/rng.hpp"
#include "pex/semigroup.hpp"
#include "pex/stats.hpp"

namespace pex {

std::string to_string(SigmaMethod m) {
  switch (m) {
    case SigmaMethod::msd_alpha_walk: return "msd_alpha_walk";
    case SigmaMethod::msd_omega_walk_timechange: return "msd_omega_walk_timechange";
    case SigmaMethod::corrector_1d: return "corrector_1d";
  }
  return "?";
}

SigmaMethod sigma_method_from_string(const std::string& s) {
  if (s == "msd_alpha_walk" || s == "alpha") return SigmaMethod::msd_alpha_walk;
  if (s == "msd_omega_walk_timechange" || s == "omega")
    return SigmaMethod::msd_omega_walk_timechange;
  if (s == "corrector_1d" || s == "corrector") return SigmaMethod::corrector_1d;
  throw std::invalid_argument("unknown sigma method '" + s + "'");
}

namespace {

nlohmann::json matrix_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < m.dim(); ++i) {
    nlohmann::json r = nlohmann::json::array();
    for (std::size_t j = 0; j < m.dim(); ++j) r.push_back(m(i, j));
    rows.push_back(r);
  }
  return rows;
}

// Integer moment sums of displacements at each sampling time for one batch.
struct MsdBatch {
  std::int64_t n = 0;
  std::vector<std::int64_t> s1;  // [k][i]
  std::vector<std::int64_t> s2;  // [k][i][j]
  std::vector<std::int64_t> r1, r2;  // untransformed omega walk (Lambda)
  std::uint64_t jumps = 0;
};

void add_moments(std::vector<std::int64_t>& s1, std::vector<std::int64_t>& s2,
                 std::size_t k, const std::vector<int>& disp) {
  const std::size_t d = disp.size();
  for (std::size_t i = 0; i < d; ++i) {
    s1[k * d + i] += disp[i];
    for (std::size_t j = 0; j < d; ++j) s2[(k * d + i) * d + j] +=
        static_cast<std::int64_t>(disp[i]) * disp[j];
  }
}

// Covariance slopes over the sampling times from moment sums.
Matrix slopes(std::int64_t n, const std::vector<std::int64_t>& s1,
              const std::vector<std::int64_t>& s2, const std::vector<double>& times,
              std::size_t d, std::vector<double>* r2 = nullptr) {
  Matrix m(d);
  const double nn = static_cast<double>(n);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      std::vector<double> cov(times.size());
      for (std::size_t k = 0; k < times.size(); ++k) {
        const double mi = static_cast<double>(s1[k * d + i]) / nn;
        const double mj = static_cast<double>(s1[k * d + j]) / nn;
        cov[k] = (static_cast<double>(s2[(k * d + i) * d + j]) - nn * mi * mj) / (nn - 1.0);
      }
      const auto fit = linear_fit(times, cov);
      m(i, j) = fit.slope;
      if (r2 && i == j) r2->push_back(fit.r2);
    }
  return m;
}

std::vector<int> displacement_between(const Trajectory& tr, std::size_t& cursor,
                                      std::vector<int>& disp, double t) {
  while (cursor < tr.events.size() && tr.events[cursor].time <= t) {
    const int k = tr.events[cursor].slot;
    disp[Torus::axis(k)] += Torus::step(k);
    ++cursor;
  }
  return disp;
}

}  // namespace

bool SigmaEstimate::valid() const {
  const std::size_t d = sigma.dim();
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < i; ++j) {
      const double tol = 3.0 * std::hypot(stderr_(i, j), stderr_(j, i)) + 1e-12;
      if (std::fabs(sigma(i, j) - sigma(j, i)) > tol) return false;
    }
  return symmetric_eigenvalues(sigma).front() > 0.0;
}

nlohmann::json SigmaEstimate::to_json() const {
  nlohmann::json j = {{"sigma", matrix_json(sigma)},
                      {"stderr", matrix_json(stderr_)},
                      {"method", to_string(method)},
                      {"replicas", replicas},
                      {"horizon", horizon},
                      {"env_hash", env_hash},
                      {"valid", valid()}};
  if (!extra.empty()) j["extra"] = extra;
  return j;
}

SigmaEstimate estimate_sigma_msd(const Environment& env, SigmaMethod kind, double horizon,
                                 std::uint64_t replicas, std::uint64_t seed,
                                 const MsdOptions& opt) {
  if (kind == SigmaMethod::corrector_1d) return corrector_1d(env);
  if (!(horizon > 0.0)) throw std::invalid_argument("estimate_sigma_msd: horizon must be > 0");
  if (opt.time_points < 2) throw std::invalid_argument("estimate_sigma_msd: need >= 2 time points");
  if (replicas < 2 * static_cast<std::uint64_t>(opt.batches))
    throw std::invalid_argument("estimate_sigma_msd: need at least two replicas per batch");
  const std::size_t d = env.dim();
  const Site n = env.size();

  // reversible law of the alpha walk: P(x) proportional to alpha_x
  std::vector<std::int64_t> cum(static_cast<std::size_t>(n));
  std::int64_t acc = 0;
  double mean_rate = 0.0;
  for (Site x = 0; x < n; ++x) {
    cum[x] = (acc += env[x]);
    mean_rate += static_cast<double>(env[x]) * holding_rate(env, x);
  }
  mean_rate /= static_cast<double>(acc);
  if (opt.weighted_start && mean_rate * horizon < 100.0)
    throw std::invalid_argument(
        "estimate_sigma_msd: horizon too short for 100 jumps per replica on average");

  std::vector<double> times(static_cast<std::size_t>(opt.time_points));
  for (int k = 0; k < opt.time_points; ++k)
    times[k] = horizon / 2.0 + horizon / 2.0 * k / (opt.time_points - 1);

  const bool omega = kind == SigmaMethod::msd_omega_walk_timechange;
  const std::size_t nt = times.size();
  auto check_wrap = [&](const std::vector<int>& disp) {
    for (std::size_t i = 0; i < d; ++i)
      if (2 * std::abs(disp[i]) > env.dims()[i])
        throw std::runtime_error(
            "estimate_sigma_msd: displacement exceeds half the torus; grow the torus");
  };

  auto batches = map_chunks<MsdBatch>(
      replicas,
      [&](std::size_t b, std::size_t e) {
        MsdBatch mb;
        mb.s1.assign(nt * d, 0);
        mb.s2.assign(nt * d * d, 0);
        if (omega) {
          mb.r1.assign(nt * d, 0);
          mb.r2.assign(nt * d * d, 0);
        }
        for (std::size_t r = b; r < e; ++r) {
          Rng start_rng(derive_seed(seed, 0, r));
          const Site x0 = opt.weighted_start
                              ? static_cast<Site>(std::upper_bound(
                                    cum.begin(), cum.end(),
                                    static_cast<std::int64_t>(start_rng.below(
                                        static_cast<std::uint64_t>(acc)))) -
                                                  cum.begin())
                              : 0;
          const auto wseed = derive_seed(seed, 1, r);
          ++mb.n;
          if (!omega) {
            Walker w(env, WalkKind::alpha_walk, x0, wseed);
            for (std::size_t k = 0; k < nt; ++k) {
              w.advance_to(times[k]);
              check_wrap(w.displacement());
              add_moments(mb.s1, mb.s2, k, w.displacement());
            }
            mb.jumps += w.jumps();
          } else {
            // R(t) >= t since alpha >= 1, so an omega horizon of T suffices
            const Trajectory raw = simulate_walk(env, WalkKind::omega_walk, x0, horizon, wseed);
            const Trajectory tc = time_change(raw, env);
            std::size_t c1 = 0, c2 = 0;
            std::vector<int> d1(d, 0), d2(d, 0);
            for (std::size_t k = 0; k < nt; ++k) {
              displacement_between(tc, c1, d1, times[k]);
              check_wrap(d1);
              add_moments(mb.s1, mb.s2, k, d1);
              displacement_between(raw, c2, d2, times[k]);
              check_wrap(d2);
              add_moments(mb.r1, mb.r2, k, d2);
            }
            std::size_t jumps_tc = 0;
            while (jumps_tc < tc.events.size() && tc.events[jumps_tc].time <= horizon) ++jumps_tc;
            mb.jumps += jumps_tc;
          }
        }
        return mb;
      },
      static_cast<std::size_t>(opt.batches));

  MsdBatch all;
  all.s1.assign(nt * d, 0);
  all.s2.assign(nt * d * d, 0);
  all.r1.assign(omega ? nt * d : 0, 0);
  all.r2.assign(omega ? nt * d * d : 0, 0);
  for (const auto& b : batches) {
    all.n += b.n;
    all.jumps += b.jumps;
    for (std::size_t i = 0; i < all.s1.size(); ++i) all.s1[i] += b.s1[i];
    for (std::size_t i = 0; i < all.s2.size(); ++i) all.s2[i] += b.s2[i];
    for (std::size_t i = 0; i < all.r1.size(); ++i) all.r1[i] += b.r1[i];
    for (std::size_t i = 0; i < all.r2.size(); ++i) all.r2[i] += b.r2[i];
  }

  SigmaEstimate est;
  est.method = kind;
  est.replicas = replicas;
  est.horizon = horizon;
  est.env_hash = env.hash();
  std::vector<double> r2;
  est.sigma = slopes(all.n, all.s1, all.s2, times, d, &r2);
  est.stderr_ = Matrix(d);
  std::vector<RunningStats> bs(d * d), bl(d * d);
  for (const auto& b : batches) {
    const Matrix m = slopes(b.n, b.s1, b.s2, times, d);
    for (std::size_t i = 0; i < d * d; ++i) bs[i].push(m.data()[i]);
    if (omega) {
      const Matrix l = slopes(b.n, b.r1, b.r2, times, d);
      for (std::size_t i = 0; i < d * d; ++i) bl[i].push(l.data()[i]);
    }
  }
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) est.stderr_(i, j) = bs[i * d + j].stderr_mean();
  est.extra["r2_diagonal"] = r2;
  est.extra["mean_jumps"] = static_cast<double>(all.jumps) / static_cast<double>(all.n);
  est.extra["batches"] = batches.size();
  est.extra["weighted_start"] = opt.weighted_start;
  if (omega) {
    const Matrix lam = slopes(all.n, all.r1, all.r2, times, d);
    const double ea = env.empirical_mean();
    Matrix lam_se(d), via(d);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) {
        lam_se(i, j) = bl[i * d + j].stderr_mean();
        via(i, j) = lam(i, j) / ea;
      }
    est.extra["lambda"] = matrix_json(lam);
    est.extra["lambda_stderr"] = matrix_json(lam_se);
    est.extra["mean_alpha"] = ea;
    est.extra["sigma_from_lambda"] = matrix_json(via);
    double worst = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double se = std::hypot(est.stderr_(i, i), lam_se(i, i) / ea);
      worst = std::max(worst, std::fabs(est.sigma(i, i) - via(i, i)) / se);
    }
    est.extra["timechange_agreement_z"] = worst;
  }
  return est;
}

SigmaEstimate estimate_sigma_msd(const EnvLaw& law, const std::vector<int>& dims,
                                 SigmaMethod kind, double horizon, std::uint64_t replicas,
                                 std::uint64_t seed, const MsdOptions& opt) {
  const Environment env = sample_environment(law, dims, derive_seed(seed, fnv1a("env")));
  return estimate_sigma_msd(env, kind, horizon, replicas, seed, opt);
}

SigmaEstimate corrector_1d(const Environment& env) {
  if (env.dim() != 1) throw std::invalid_argument("corrector_1d: d must be 1");
  const auto cf = conductances(env);
  KahanSum inv;
  for (auto w : cf.bond_values()) inv += 1.0 / static_cast<double>(w);
  const double mean_inv = inv.value() / static_cast<double>(env.size());
  SigmaEstimate est;
  est.method = SigmaMethod::corrector_1d;
  est.sigma = Matrix(1, 2.0 / (mean_inv * env.empirical_mean()));
  est.stderr_ = Matrix(1, 0.0);
  est.env_hash = env.hash();
  est.extra["lambda"] = 2.0 / mean_inv;
  est.extra["mean_alpha"] = env.empirical_mean();
  return est;
}

double sigma_oracle_1d(const EnvLaw& law, std::size_t d) {
  if (d != 1) throw std::invalid_argument("sigma_oracle_1d: only d = 1 is supported");
  if (law.kind == LawKind::markov_chain_1d_product)
    throw std::invalid_argument("sigma_oracle_1d: law must be i.i.d.");
  law.validate();
  const double mi = law.mean_inverse();
  return 2.0 / (mi * mi * law.mean());
}

// ---------------------------------------------------------------- convergence

nlohmann::json ConvergenceReport::to_json() const {
  return {{"N_grid", n_grid}, {"times", times},     {"sup_metric", sup_metric},
          {"l1_metric", l1_metric}, {"sup_by_t", sup_by_t}, {"l1_by_t", l1_by_t}};
}

namespace {

void require_spd(const Matrix& sigma) {
  try {
    (void)cholesky(sigma);
  } catch (const std::domain_error&) {
    throw std::invalid_argument("Sigma is not positive-definite");
  }
}

int uniform_side(const Environment& env) {
  const int n = env.dims()[0];
  for (int l : env.dims())
    if (l != n) throw std::invalid_argument("environment must have equal sides");
  return n;
}

std::vector<double> macro_point(const Torus& tor, Site x, double n) {
  const auto c = tor.coords(x);
  std::vector<double> u(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) u[i] = c[i] / n;
  return u;
}

}  // namespace

ConvergenceReport semigroup_convergence(const std::vector<Environment>& envs,
                                        const TestFunction& g, const Matrix& sigma,
                                        double T, const std::vector<double>& t_grid,
                                        double tol) {
  require_spd(sigma);
  ConvergenceReport rep;
  rep.times = t_grid;
  if (std::find(t_grid.begin(), t_grid.end(), T) == t_grid.end()) rep.times.push_back(T);
  std::sort(rep.times.begin(), rep.times.end());
  for (const auto& env : envs) {
    const int n = uniform_side(env);
    const double nd = std::pow(static_cast<double>(n), static_cast<double>(env.dim()));
    const auto gv = lattice_values(env.torus, g, n);
    std::vector<double> micro(rep.times.size());
    for (std::size_t k = 0; k < micro.size(); ++k) micro[k] = rep.times[k] * n * n;
    const auto sn = semigroup_apply(make_generator(env, WalkKind::alpha_walk), gv, micro, tol);
    std::vector<double> sup_t, l1_t;
    for (std::size_t k = 0; k < rep.times.size(); ++k) {
      double sup = 0.0;
      KahanSum l1;
      for (Site x = 0; x < env.size(); ++x) {
        const auto u = macro_point(env.torus, x, n);
        const double ref = g.heat_evolved(sigma, rep.times[k], u.data());
        const double diff = std::fabs(sn[k][x] - ref);
        sup = std::max(sup, diff);
        l1 += diff * env[x];
      }
      sup_t.push_back(sup);
      l1_t.push_back(l1.value() / nd);
    }
    rep.n_grid.push_back(n);
    rep.sup_metric.push_back(*std::max_element(sup_t.begin(), sup_t.end()));
    rep.l1_metric.push_back(*std::max_element(l1_t.begin(), l1_t.end()));
    rep.sup_by_t.push_back(sup_t);
    rep.l1_by_t.push_back(l1_t);
  }
  return rep;
}

// ---------------------------------------------------------------- local CLT

nlohmann::json LocalCltReport::to_json() const {
  return {{"N_grid", n_grid}, {"metric", metric}, {"worst_t", worst_t},
          {"worst_u", worst_u}, {"weighted", weighted}};
}

namespace {

std::vector<std::vector<double>> lclt_rows(const Environment& env, const std::vector<double>& t,
                                           double tol) {
  const int n = uniform_side(env);
  std::vector<double> delta(static_cast<std::size_t>(env.size()), 0.0);
  delta[0] = 1.0;
  std::vector<double> micro(t.size());
  for (std::size_t k = 0; k < t.size(); ++k) micro[k] = t[k] * n * n;
  return semigroup_apply_left(make_generator(env, WalkKind::alpha_walk), delta, micro, tol);
}

double lclt_reference(const Environment& env, const Matrix& sigma, double t, Site y,
                      bool weighted, double mean_alpha) {
  const int n = env.dims()[0];
  const auto u = macro_point(env.torus, y, n);
  const double k = periodized_gaussian(sigma * t, u.data());
  return weighted ? k * env[y] / mean_alpha : k;
}

}  // namespace

LocalCltReport local_clt_check(const std::vector<Environment>& envs, const Matrix& sigma,
                               const std::vector<double>& t_grid, double ell,
                               bool weighted, double tol) {
  require_spd(sigma);
  for (double t : t_grid)
    if (!(t > 0.0)) throw std::invalid_argument("local_clt_check: times must be > 0");
  LocalCltReport rep;
  rep.weighted = weighted;
  for (const auto& env : envs) {
    const int n = uniform_side(env);
    const double nd = std::pow(static_cast<double>(n), static_cast<double>(env.dim()));
    const double ma = env.empirical_mean();
    const auto rows = lclt_rows(env, t_grid, tol);
    double worst = 0.0, wt = 0.0, wu = 0.0;
    for (std::size_t k = 0; k < t_grid.size(); ++k)
      for (Site y = 0; y < env.size(); ++y) {
        const double r = env.torus.euclidean_distance(0, y) / n;
        if (r > ell) continue;
        const double diff =
            std::fabs(nd * rows[k][y] - lclt_reference(env, sigma, t_grid[k], y, weighted, ma));
        if (diff > worst) {
          worst = diff;
          wt = t_grid[k];
          wu = r;
        }
      }
    rep.n_grid.push_back(n);
    rep.metric.push_back(worst);
    rep.worst_t.push_back(wt);
    rep.worst_u.push_back(wu);
  }
  return rep;
}

std::vector<double> local_clt_profile(const Environment& env, const Matrix& sigma, double t,
                                      bool weighted, double tol) {
  require_spd(sigma);
  if (!(t > 0.0)) throw std::invalid_argument("local_clt_profile: t must be > 0");
  const int n = uniform_side(env);
  const double nd = std::pow(static_cast<double>(n), static_cast<double>(env.dim()));
  const auto row = lclt_rows(env, {t}, tol)[0];
  std::vector<double> out(row.size());
  const double ma = env.empirical_mean();
  for (Site y = 0; y < env.size(); ++y)
    out[y] = nd * row[y] - lclt_reference(env, sigma, t, y, weighted, ma);
  return out;
}

// ---------------------------------------------------------------- Holder

nlohmann::json HolderReport::to_json() const {
  return {{"C_hat", c_hat},
          {"gamma_hat", gamma_hat},
          {"C_fit", c_fit},
          {"violation_fraction", violation_fraction},
          {"violation_fraction_fit", violation_fraction_fit},
          {"r2", r2},
          {"pairs", pairs},
          {"degenerate", degenerate}};
}

HolderReport holder_modulus_estimate(const Environment& env, const TestFunction& g, int n,
                                     double t_lo, double t_hi, int time_points, int stride,
                                     double tol) {
  if (!(t_lo > 0.0)) throw std::invalid_argument("holder_modulus_estimate: t range touches 0");
  if (!(t_hi >= t_lo)) throw std::invalid_argument("holder_modulus_estimate: empty t range");
  if (time_points < 1 || stride < 1)
    throw std::invalid_argument("holder_modulus_estimate: bad sampling parameters");
  std::vector<double> times(static_cast<std::size_t>(time_points));
  for (int k = 0; k < time_points; ++k)
    times[k] = time_points == 1 ? t_lo : t_lo + (t_hi - t_lo) * k / (time_points - 1);
  std::vector<double> micro(times.size());
  for (std::size_t k = 0; k < times.size(); ++k) micro[k] = times[k] * n * n;
  const auto gv = lattice_values(env.torus, g, n);
  const auto u = semigroup_apply(make_generator(env, WalkKind::alpha_walk), gv, micro, tol);

  struct Pt {
    double t;
    Site x;
    double v;
  };
  std::vector<Pt> pts;
  for (std::size_t k = 0; k < times.size(); ++k)
    for (Site x = 0; x < env.size(); x += stride) pts.push_back({times[k], x, u[k][x]});

  const double gs = g.sup_norm();
  // increments below the truncation error of the semigroup are noise
  const double floor = std::max(1e-14, 10.0 * tol);
  std::vector<double> lr, ld;
  std::vector<std::pair<double, double>> samples;  // (r, delta / |G|)
  for (std::size_t a = 0; a < pts.size(); ++a)
    for (std::size_t b = a + 1; b < pts.size(); ++b) {
      const double dx = env.torus.euclidean_distance(pts[a].x, pts[b].x) / n;
      const double r = std::max(std::sqrt(std::fabs(pts[a].t - pts[b].t)), dx) /
                       std::sqrt(std::min(pts[a].t, pts[b].t));
      if (r <= 0.0 || r > 1.0) continue;
      const double delta = std::fabs(pts[a].v - pts[b].v) / (gs > 0 ? gs : 1.0);
      samples.emplace_back(r, delta);
      if (delta > floor) {
        lr.push_back(std::log(r));
        ld.push_back(std::log(delta));
      }
    }
  HolderReport rep;
  rep.pairs = samples.size();
  if (lr.size() < 2 || gs == 0.0) {
    rep.degenerate = true;
    return rep;
  }
  const auto fit = linear_fit(lr, ld);
  rep.gamma_hat = fit.slope;
  rep.c_fit = std::exp(fit.intercept);
  rep.r2 = fit.r2;
  std::uint64_t viol_fit = 0;
  for (const auto& [r, delta] : samples) {
    const double bound = std::pow(r, rep.gamma_hat);
    rep.c_hat = std::max(rep.c_hat, delta / bound);
    if (delta > rep.c_fit * bound) ++viol_fit;
  }
  std::uint64_t viol = 0;
  for (const auto& [r, delta] : samples)
    if (delta > rep.c_hat * std::pow(r, rep.gamma_hat) * (1.0 + 1e-12)) ++viol;
  rep.violation_fraction = static_cast<double>(viol) / static_cast<double>(samples.size());
  rep.violation_fraction_fit = static_cast<double>(viol_fit) / static_cast<double>(samples.size());
  return rep;
}

}  // namespace pex
