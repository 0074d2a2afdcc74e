#include "pex/hydrodynamics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <sstream>

#include "pex/parallel.hpp"
#include "pex/rng.hpp"
#include "pex/semigroup.hpp"
#include "pex/stats.hpp"

namespace pex {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t b = 0;
  for (std::size_t i = 0; i <= s.size(); ++i)
    if (i == s.size() || s[i] == sep) {
      out.emplace_back(s.substr(b, i - b));
      b = i + 1;
    }
  return out;
}

double to_double(const std::string& s, const char* what) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument(std::string("profile: bad ") + what + " '" + s + "'");
  }
}

double nd_of(int n, std::size_t d) {
  return std::pow(static_cast<double>(n), static_cast<double>(d));
}

}  // namespace

// ---------------------------------------------------------------- profiles

MacroscopicProfile MacroscopicProfile::constant(std::size_t d, double rho) {
  MacroscopicProfile p;
  p.kind_ = Kind::constant;
  p.d_ = d;
  p.mean_ = rho;
  p.validate();
  return p;
}

MacroscopicProfile MacroscopicProfile::sinusoid(std::size_t d, double mean,
                                                double amplitude, std::size_t axis) {
  if (axis >= d) throw std::invalid_argument("profile: axis out of range");
  MacroscopicProfile p;
  p.kind_ = Kind::sinusoid;
  p.d_ = d;
  p.mean_ = mean;
  p.amp_ = amplitude;
  p.axis_ = axis;
  p.validate();
  return p;
}

MacroscopicProfile MacroscopicProfile::custom(std::size_t d,
                                              std::function<double(const double*)> fn,
                                              std::string label) {
  MacroscopicProfile p;
  p.kind_ = Kind::custom;
  p.d_ = d;
  p.fn_ = std::move(fn);
  p.label_ = std::move(label);
  p.validate();
  return p;
}

MacroscopicProfile MacroscopicProfile::parse(std::string_view s, std::size_t d) {
  const auto parts = split(s, ':');
  if (parts[0] == "const" && parts.size() == 2)
    return constant(d, to_double(parts[1], "density"));
  if (parts[0] == "sin" && parts.size() == 1) return sinusoid(d);
  if (parts[0] == "sin" && parts.size() == 3)
    return sinusoid(d, to_double(parts[1], "mean"), to_double(parts[2], "amplitude"));
  throw std::invalid_argument("profile: expected const:RHO or sin[:MEAN:AMP], got '" +
                              std::string(s) + "'");
}

double MacroscopicProfile::operator()(const double* u) const {
  switch (kind_) {
    case Kind::constant: return mean_;
    case Kind::sinusoid: return mean_ + amp_ * std::sin(kTwoPi * u[axis_]);
    case Kind::custom: return fn_(u);
  }
  return 0.0;
}

void MacroscopicProfile::validate(int grid) const {
  if (kind_ == Kind::constant) {
    if (!(mean_ >= 0.0 && mean_ <= 1.0))
      throw std::invalid_argument("profile: density outside [0,1]");
    return;
  }
  if (kind_ == Kind::sinusoid) {
    if (!(mean_ - std::fabs(amp_) >= 0.0 && mean_ + std::fabs(amp_) <= 1.0))
      throw std::invalid_argument("profile: sinusoid leaves [0,1]");
    return;
  }
  // custom: scan a grid (coarser per axis in higher dimension)
  const int m = std::max(2, static_cast<int>(std::pow(grid, 1.0 / static_cast<double>(d_))));
  std::vector<int> idx(d_, 0);
  std::vector<double> u(d_);
  for (;;) {
    for (std::size_t i = 0; i < d_; ++i) u[i] = static_cast<double>(idx[i]) / m;
    const double v = fn_(u.data());
    if (!(v >= 0.0 && v <= 1.0))
      throw std::invalid_argument("profile: value " + std::to_string(v) + " outside [0,1]");
    std::size_t k = 0;
    while (k < d_ && ++idx[k] == m) idx[k++] = 0;
    if (k == d_) break;
  }
}

std::string MacroscopicProfile::label() const {
  std::ostringstream os;
  os.precision(17);
  switch (kind_) {
    case Kind::constant: os << "const:" << mean_; break;
    case Kind::sinusoid: os << "sin:" << mean_ << ':' << amp_; break;
    case Kind::custom: os << label_; break;
  }
  return os.str();
}

nlohmann::json MacroscopicProfile::to_json() const {
  nlohmann::json j = {{"label", label()}, {"d", d_}};
  if (kind_ == Kind::sinusoid) j["axis"] = axis_;
  return j;
}

// ---------------------------------------------------------------- fields

FieldProbe::FieldProbe(const Environment& env, TestFunction g_, int n)
    : g(std::move(g_)), values(lattice_values(env.torus, g, n)), scale(1.0 / nd_of(n, env.dim())) {}

double FieldProbe::operator()(const ParticleConfig& cfg) const {
  KahanSum s;
  for (std::size_t x = 0; x < values.size(); ++x)
    if (cfg[x] != 0) s += values[x] * cfg[x];
  return s.value() * scale;
}

double FieldProbe::bound(int c_max) const {
  KahanSum s;
  for (double v : values) s += std::fabs(v);
  return c_max * s.value() * scale;
}

double density_field(const Environment& env, const ParticleConfig& cfg, int n,
                     const TestFunction& g) {
  check_config(env, cfg);
  return FieldProbe(env, g, n)(cfg);
}

double law_mean(const Environment& env) {
  return env.law ? env.law->mean() : env.empirical_mean();
}

// ---------------------------------------------------------------- heat equation

namespace {

// Cyclic tridiagonal solve with constant bands (a, b, a) by Sherman-Morrison.
std::vector<double> cyclic_solve(double a, double b, std::vector<double> r) {
  const std::size_t n = r.size();
  const double gamma = -b;
  std::vector<double> diag(n, b), u(n, 0.0);
  diag[0] = b - gamma;
  diag[n - 1] = b - a * a / gamma;
  u[0] = gamma;
  u[n - 1] = a;
  auto thomas = [&](std::vector<double> rhs) {
    std::vector<double> c(n), x(n);
    c[0] = a / diag[0];
    rhs[0] /= diag[0];
    for (std::size_t i = 1; i < n; ++i) {
      const double m = diag[i] - a * c[i - 1];
      c[i] = a / m;
      rhs[i] = (rhs[i] - a * rhs[i - 1]) / m;
    }
    x[n - 1] = rhs[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) x[i] = rhs[i] - c[i] * x[i + 1];
    return x;
  };
  const auto y = thomas(std::move(r));
  const auto z = thomas(u);
  const double f = (y[0] + a * y[n - 1] / gamma) / (1.0 + z[0] + a * z[n - 1] / gamma);
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = y[i] - f * z[i];
  return x;
}

}  // namespace

std::function<double(const double*)> heat_solution(const Matrix& sigma,
                                                   const MacroscopicProfile& rho, double t,
                                                   int grid) {
  if (sigma.dim() != rho.dim()) throw std::invalid_argument("heat_solution: dimension mismatch");
  try {
    (void)cholesky(sigma);
  } catch (const std::domain_error&) {
    throw std::invalid_argument("heat_solution: Sigma is not positive-definite");
  }
  if (!(t >= 0.0)) throw std::invalid_argument("heat_solution: t must be >= 0");
  using K = MacroscopicProfile::Kind;
  if (rho.kind() == K::constant || t == 0.0) return [rho](const double* u) { return rho(u); };
  if (rho.kind() == K::sinusoid) {
    const std::size_t i = rho.axis();
    const double decay = std::exp(-2.0 * std::numbers::pi * std::numbers::pi * sigma(i, i) * t);
    const double m = rho.mean_value(), a = rho.amplitude() * decay;
    return [m, a, i](const double* u) { return m + a * std::sin(kTwoPi * u[i]); };
  }
  if (rho.dim() != 1)
    throw std::invalid_argument("heat_solution: custom profiles are supported in d = 1 only");
  if (grid < 8) throw std::invalid_argument("heat_solution: grid too coarse");
  // Crank-Nicolson for d_t rho = (Sigma/2) rho''
  const double h = 1.0 / grid;
  const int steps = std::max(1, static_cast<int>(std::ceil(t / (0.25 * h))));
  const double dt = t / steps;
  const double r = 0.5 * sigma(0, 0) * dt / (h * h);
  std::vector<double> v(static_cast<std::size_t>(grid));
  for (int k = 0; k < grid; ++k) {
    const double u = k * h;
    v[k] = rho(&u);
  }
  for (int s = 0; s < steps; ++s) {
    std::vector<double> rhs(v.size());
    for (int k = 0; k < grid; ++k) {
      const double l = v[(k + grid - 1) % grid], c = v[k], rr = v[(k + 1) % grid];
      rhs[k] = c + 0.5 * r * (l - 2.0 * c + rr);
    }
    v = cyclic_solve(-0.5 * r, 1.0 + r, std::move(rhs));
  }
  return [v = std::move(v), grid](const double* u) {
    double x = u[0] - std::floor(u[0]);
    const double pos = x * grid;
    const int k = std::min(grid - 1, static_cast<int>(pos));
    const double f = pos - k;
    return (1.0 - f) * v[k] + f * v[(k + 1) % grid];
  };
}

double limit_field(double mean_alpha, const Matrix& sigma, const MacroscopicProfile& rho,
                   const TestFunction& g, double t) {
  if (g.dim() != rho.dim()) throw std::invalid_argument("limit_field: dimension mismatch");
  const auto rt = heat_solution(sigma, rho, t);
  return mean_alpha * g.integrate_against(rt);
}

// ---------------------------------------------------------------- consistency

nlohmann::json ConsistencyReport::to_json() const {
  return {{"N", n},           {"probability", probability}, {"stderr", stderr_},
          {"samples", samples}, {"limit", limit},           {"mean_field", mean_field}};
}

ConsistencyReport consistency_check(const Environment& env, const MacroscopicProfile& rho,
                                    int n, const TestFunction& g, double delta,
                                    std::uint64_t samples, std::uint64_t seed) {
  if (samples == 0) throw std::invalid_argument("consistency_check: need samples > 0");
  const FieldProbe probe(env, g, n);
  const double ma = law_mean(env);
  const double limit = ma * g.integrate_against([&](const double* u) { return rho(u); });
  struct Acc {
    std::uint64_t hits = 0;
    KahanSum sum;
  };
  const auto fn = [&](const double* u) { return rho(u); };
  const auto parts = map_chunks<Acc>(samples, [&](std::size_t b, std::size_t e) {
    Acc a;
    for (std::size_t s = b; s < e; ++s) {
      const auto cfg = binomial_measure_sampler(env, fn, n, derive_seed(seed, s));
      const double x = probe(cfg);
      a.sum += x;
      if (std::fabs(x - limit) > delta) ++a.hits;
    }
    return a;
  });
  ConsistencyReport rep;
  rep.n = n;
  rep.samples = samples;
  rep.limit = limit;
  std::uint64_t hits = 0;
  KahanSum sum;
  for (const auto& a : parts) {
    hits += a.hits;
    sum += a.sum.value();
  }
  const double ns = static_cast<double>(samples);
  rep.probability = static_cast<double>(hits) / ns;
  rep.stderr_ = std::sqrt(rep.probability * (1.0 - rep.probability) / ns);
  rep.mean_field = sum.value() / ns;
  return rep;
}

// ---------------------------------------------------------------- variance bound

nlohmann::json VarianceBoundReport::to_json() const {
  return {{"N", n},
          {"t", t},
          {"replicas", replicas},
          {"second_moment", second_moment},
          {"stderr", stderr_},
          {"mean", mean},
          {"mean_stderr", mean_stderr},
          {"bound", bound},
          {"pass", pass}};
}

VarianceBoundReport variance_bound_check(const Environment& env, const ParticleConfig& cfg0,
                                         int n, const TestFunction& g, double t,
                                         std::uint64_t replicas, std::uint64_t seed) {
  check_config(env, cfg0);
  if (replicas < 2) throw std::invalid_argument("variance_bound_check: need >= 2 replicas");
  if (!(t >= 0.0)) throw std::invalid_argument("variance_bound_check: t must be >= 0");
  const FieldProbe probe(env, g, n);
  const double horizon = t * n * n;
  const auto sg = semigroup_apply(make_generator(env, WalkKind::alpha_walk), probe.values,
                                  {horizon})[0];
  KahanSum sub, bnd;
  for (Site x = 0; x < env.size(); ++x) {
    sub += sg[x] * cfg0[x];
    bnd += probe.values[x] * probe.values[x] * env[x];
  }
  const double x0 = sub.value() * probe.scale;
  VarianceBoundReport rep;
  rep.n = n;
  rep.t = t;
  rep.replicas = replicas;
  rep.bound = 0.5 * probe.scale * probe.scale * bnd.value();

  struct Acc {
    RunningStats m, m2;
  };
  const auto parts = map_chunks<Acc>(replicas, [&](std::size_t b, std::size_t e) {
    Acc a;
    for (std::size_t r = b; r < e; ++r) {
      DirectSep sep(env, cfg0, derive_seed(seed, r));
      sep.advance_to(horizon);
      const double m = probe(sep.config()) - x0;
      a.m.push(m);
      a.m2.push(m * m);
    }
    return a;
  });
  RunningStats m, m2;
  for (const auto& a : parts) {
    m.merge(a.m);
    m2.merge(a.m2);
  }
  rep.second_moment = m2.mean();
  rep.stderr_ = m2.stderr_mean();
  rep.mean = m.mean();
  rep.mean_stderr = m.stderr_mean();
  rep.pass = rep.second_moment <= rep.bound + 4.0 * rep.stderr_;
  return rep;
}

// ---------------------------------------------------------------- series

DensityFieldSeries record_density_series(const Environment& env, const ParticleConfig& cfg0,
                                         int n, const std::vector<FieldProbe>& probes,
                                         const std::vector<double>& t_grid,
                                         std::uint64_t seed) {
  if (!std::is_sorted(t_grid.begin(), t_grid.end()))
    throw std::invalid_argument("record_density_series: time grid must be sorted");
  DensityFieldSeries s;
  s.n = n;
  s.times = t_grid;
  s.env_hash = env.hash();
  s.seed = seed;
  DirectSep sep(env, cfg0, seed);
  for (double t : t_grid) {
    s.events += sep.advance_to(t * n * n);
    std::vector<double> row;
    row.reserve(probes.size());
    for (const auto& p : probes) row.push_back(p(sep.config()));
    s.values.push_back(std::move(row));
  }
  return s;
}

// ---------------------------------------------------------------- experiment

nlohmann::json HdlReport::to_json() const {
  nlohmann::json e = nlohmann::json::array();
  for (const auto& x : entries)
    e.push_back({{"N", x.n},
                 {"t", x.t},
                 {"G", x.g},
                 {"empirical", x.empirical},
                 {"limit", x.limit},
                 {"abs_err", x.abs_err},
                 {"stderr", x.stderr_}});
  return {{"entries", e},
          {"N_grid", n_grid},
          {"err", err},
          {"err_stderr", err_stderr},
          {"threshold", threshold},
          {"mean_alpha", mean_alpha},
          {"projected_events", projected_events},
          {"monotone", monotone},
          {"within_threshold", within_threshold},
          {"pass", pass}};
}

void HdlReport::write_csv(std::ostream& os) const {
  os << "N,t,G_id,replica,value\n";
  os.precision(17);
  for (const auto& r : rows)
    os << r.n << ',' << r.t << ',' << r.g << ',' << r.replica << ',' << r.value << '\n';
}

namespace {

void check_hdl(const HdlConfig& c) {
  c.law.validate();
  c.rho.validate();
  if (c.rho.dim() != c.d) throw std::invalid_argument("hdl: profile dimension != d");
  if (c.sigma.dim() != c.d) throw std::invalid_argument("hdl: Sigma dimension != d");
  if (c.n_grid.empty()) throw std::invalid_argument("hdl: empty N_grid");
  if (c.t_grid.empty()) throw std::invalid_argument("hdl: empty t_grid");
  if (c.g_list.empty()) throw std::invalid_argument("hdl: no test functions");
  if (c.envs == 0 || c.replicas == 0) throw std::invalid_argument("hdl: need envs, replicas > 0");
  for (const auto& g : c.g_list)
    if (g.dim() != c.d) throw std::invalid_argument("hdl: test function dimension != d");
  for (double t : c.t_grid)
    if (!(t >= 0.0)) throw std::invalid_argument("hdl: negative time");
}

}  // namespace

double hdl_projected_events(const HdlConfig& c) {
  // mean directed-bond rate under the local-equilibrium product law:
  // E[eta_x (alpha_y - eta_y)] = E[alpha]^2 rho (1 - rho), averaged over the profile
  const int m = 256;
  double avg = 0.0;
  std::vector<double> u(c.d, 0.0);
  for (int k = 0; k < m; ++k) {
    u[0] = (k + 0.5) / m;
    const double r = c.rho(u.data());
    avg += r * (1.0 - r);
  }
  avg /= m;
  const double ea = c.law.mean();
  const double tmax = *std::max_element(c.t_grid.begin(), c.t_grid.end());
  double total = 0.0;
  for (int n : c.n_grid)
    total += 2.0 * static_cast<double>(c.d) * nd_of(n, c.d) * ea * ea * avg * tmax * n * n;
  return total * static_cast<double>(c.envs * c.replicas);
}

HdlReport hdl_experiment(const HdlConfig& c) {
  check_hdl(c);
  HdlReport rep;
  rep.projected_events = hdl_projected_events(c);
  if (rep.projected_events > c.event_cap) {
    std::ostringstream os;
    os << "hdl: projected " << rep.projected_events << " events exceeds the cap of "
       << c.event_cap;
    throw BudgetExceeded(os.str(), rep.projected_events, c.event_cap);
  }
  auto times = c.t_grid;
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  rep.mean_alpha = c.law.mean();
  double min_abs = std::numeric_limits<double>::infinity();
  for (const auto& g : c.g_list) min_abs = std::min(min_abs, g.abs_integral());
  rep.threshold = 0.05 * rep.mean_alpha * min_abs;

  // limits do not depend on N
  std::vector<std::vector<double>> limit(times.size(), std::vector<double>(c.g_list.size()));
  for (std::size_t k = 0; k < times.size(); ++k)
    for (std::size_t gi = 0; gi < c.g_list.size(); ++gi)
      limit[k][gi] = limit_field(rep.mean_alpha, c.sigma, c.rho, c.g_list[gi], times[k]);

  const auto rho_fn = [&](const double* u) { return c.rho(u); };
  const std::uint64_t tasks = c.envs * c.replicas;
  for (int n : c.n_grid) {
    const std::vector<int> dims(c.d, n);
    // environments are shared by their replicas
    const auto envs = parallel_map<Environment>(c.envs, [&](std::size_t e) {
      return sample_environment(c.law, dims,
                                derive_seed(c.seed, fnv1a("hdl-env"), static_cast<std::uint64_t>(n), e));
    });
    const auto series = parallel_map<DensityFieldSeries>(tasks, [&](std::size_t task) {
      const std::size_t e = task / c.replicas;
      const auto& env = envs[e];
      std::vector<FieldProbe> probes;
      for (const auto& g : c.g_list) probes.emplace_back(env, g, n);
      const auto cfg0 = binomial_measure_sampler(
          env, rho_fn, n, derive_seed(c.seed, fnv1a("hdl-cfg"), static_cast<std::uint64_t>(n), task));
      return record_density_series(
          env, cfg0, n, probes, times,
          derive_seed(c.seed, fnv1a("hdl-sep"), static_cast<std::uint64_t>(n), task));
    });
    double worst = -1.0, worst_se = 0.0;
    for (std::size_t k = 0; k < times.size(); ++k)
      for (std::size_t gi = 0; gi < c.g_list.size(); ++gi) {
        RunningStats val, err;
        for (std::uint64_t task = 0; task < tasks; ++task) {
          const double v = series[task].values[k][gi];
          val.push(v);
          err.push(std::fabs(v - limit[k][gi]));
          rep.rows.push_back({n, times[k], gi, task, v});
        }
        HdlEntry en{n, times[k], gi, val.mean(), limit[k][gi], err.mean(),
                    tasks > 1 ? err.stderr_mean() : 0.0};
        if (en.abs_err > worst) {
          worst = en.abs_err;
          worst_se = en.stderr_;
        }
        rep.entries.push_back(en);
      }
    rep.n_grid.push_back(n);
    rep.err.push_back(worst);
    rep.err_stderr.push_back(worst_se);
  }
  rep.monotone = true;
  for (std::size_t i = 1; i < rep.err.size(); ++i)
    if (rep.err[i] > rep.err[i - 1] + 2.0 * std::hypot(rep.err_stderr[i], rep.err_stderr[i - 1]))
      rep.monotone = false;
  rep.within_threshold = rep.err.back() <= rep.threshold;
  rep.pass = rep.monotone && rep.within_threshold;
  return rep;
}

}  // namespace pex
