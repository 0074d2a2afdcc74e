#include "pex/semigroup.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "pex/parallel.hpp"
#include "pex/stats.hpp"

namespace pex {

std::int64_t GeneratorMatrix::max_exit_rate() const {
  return exit.empty() ? 0 : *std::max_element(exit.begin(), exit.end());
}

std::int64_t GeneratorMatrix::row_sum_residual() const {
  std::int64_t worst = 0;
  const int deg = torus.degree();
  for (Site x = 0; x < size(); ++x) {
    std::int64_t s = -exit[x];
    for (int k = 0; k < deg; ++k) s += q(x, k);
    worst = std::max(worst, s < 0 ? -s : s);
  }
  return worst;
}

void GeneratorMatrix::apply(const std::vector<double>& f,
                            std::vector<double>& out) const {
  const int deg = torus.degree();
  out.resize(f.size());
  for (Site x = 0; x < size(); ++x) {
    double s = 0.0;
    for (int k = 0; k < deg; ++k)
      s += static_cast<double>(q(x, k)) * (f[torus.neighbor(x, k)] - f[x]);
    out[x] = s;
  }
}

void GeneratorMatrix::apply_left(const std::vector<double>& mu,
                                 std::vector<double>& out) const {
  const int deg = torus.degree();
  out.resize(mu.size());
  // (mu A)(y) = sum_x mu(x) q(x,y) - mu(y) exit(y); q(x,y) is found through
  // the reverse slot of y
  for (Site y = 0; y < size(); ++y) {
    double s = -static_cast<double>(exit[y]) * mu[y];
    for (int k = 0; k < deg; ++k) {
      const Site x = torus.neighbor(y, k);
      s += mu[x] * static_cast<double>(q(x, Torus::reverse(k)));
    }
    out[y] = s;
  }
}

GeneratorMatrix make_generator(const Environment& env, WalkKind kind) {
  GeneratorMatrix g;
  g.torus = env.torus;
  g.kind = kind;
  const int deg = env.torus.degree();
  g.rate.resize(static_cast<std::size_t>(env.size()) * deg);
  g.exit.assign(static_cast<std::size_t>(env.size()), 0);
  for (Site x = 0; x < env.size(); ++x) {
    for (int k = 0; k < deg; ++k) {
      const std::int64_t ay = env[env.torus.neighbor(x, k)];
      const std::int64_t r = kind == WalkKind::alpha_walk ? ay : ay * env[x];
      g.rate[x * deg + k] = r;
      g.exit[x] += r;
    }
  }
  return g;
}

std::string to_string(SemigroupMethod m) {
  return m == SemigroupMethod::uniformization ? "uniformization"
                                              : "scaling_squaring";
}

double SemigroupTable::row_sum_residual() const {
  double worst = 0.0;
  for (Site x = 0; x < n; ++x) {
    KahanSum s;
    for (Site y = 0; y < n; ++y) s += (*this)(x, y);
    worst = std::max(worst, std::fabs(s.value() - 1.0));
  }
  return worst;
}

double SemigroupTable::reversibility_residual(const Environment& env) const {
  double worst = 0.0;
  for (Site x = 0; x < n; ++x)
    for (Site y = x + 1; y < n; ++y)
      worst = std::max(worst, std::fabs(env[x] * (*this)(x, y) -
                                        env[y] * (*this)(y, x)));
  return worst;
}

void SemigroupTable::write_csv(std::ostream& os) const {
  os.precision(17);
  os << "t,size,tol\n" << t << "," << n << "," << tol << "\n";
  for (Site x = 0; x < n; ++x) {
    for (Site y = 0; y < n; ++y) os << (y ? "," : "") << (*this)(x, y);
    os << "\n";
  }
}

std::vector<double> poisson_weights(double m, double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("semigroup: tol must be > 0");
  if (m < 0.0) throw std::invalid_argument("semigroup: negative time");
  std::vector<double> w;
  if (m == 0.0) return {1.0};
  const double logm = std::log(m);
  KahanSum cum;
  for (std::size_t k = 0;; ++k) {
    const double lw = -m + static_cast<double>(k) * logm -
                      std::lgamma(static_cast<double>(k) + 1.0);
    const double v = std::exp(lw);
    w.push_back(v);
    cum += v;
    if (static_cast<double>(k) > m && 1.0 - cum.value() <= tol) break;
    if (static_cast<double>(k) > m && v == 0.0) break;
  }
  return w;
}

namespace {

template <bool Left>
std::vector<std::vector<double>> uniformized(const GeneratorMatrix& gen,
                                             const std::vector<double>& v,
                                             const std::vector<double>& times,
                                             double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("semigroup: tol must be > 0");
  if (static_cast<Site>(v.size()) != gen.size())
    throw std::invalid_argument("semigroup: vector length mismatch");
  const double lam = static_cast<double>(std::max<std::int64_t>(gen.max_exit_rate(), 1));
  std::vector<std::vector<double>> weights(times.size());
  std::size_t kmax = 0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (times[i] < 0.0) throw std::invalid_argument("semigroup: negative time");
    weights[i] = poisson_weights(lam * times[i], tol);
    kmax = std::max(kmax, weights[i].size());
  }
  std::vector<std::vector<double>> out(times.size(),
                                       std::vector<double>(v.size(), 0.0));
  std::vector<double> cur = v, tmp;
  for (std::size_t k = 0; k < kmax; ++k) {
    for (std::size_t i = 0; i < times.size(); ++i) {
      if (k >= weights[i].size()) continue;
      const double w = weights[i][k];
      if (w == 0.0) continue;
      auto& o = out[i];
      for (std::size_t x = 0; x < cur.size(); ++x) o[x] += w * cur[x];
    }
    if (k + 1 == kmax) break;
    if constexpr (Left)
      gen.apply_left(cur, tmp);
    else
      gen.apply(cur, tmp);
    for (std::size_t x = 0; x < cur.size(); ++x) cur[x] += tmp[x] / lam;
  }
  for (std::size_t i = 0; i < times.size(); ++i)
    if (times[i] == 0.0) out[i] = v;
  return out;
}

SemigroupTable dense_uniformization(const GeneratorMatrix& gen, double t,
                                    double tol) {
  const Site n = gen.size();
  SemigroupTable tab;
  tab.t = t;
  tab.n = n;
  tab.tol = tol;
  tab.method = SemigroupMethod::uniformization;
  tab.p.assign(static_cast<std::size_t>(n * n), 0.0);
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t x) {
    std::vector<double> delta(static_cast<std::size_t>(n), 0.0);
    delta[x] = 1.0;
    auto row = uniformized<true>(gen, delta, {t}, tol)[0];
    std::copy(row.begin(), row.end(), tab.p.begin() + static_cast<std::ptrdiff_t>(x * n));
  });
  return tab;
}

std::vector<double> matmul(const std::vector<double>& a,
                           const std::vector<double>& b, std::size_t n) {
  std::vector<double> c(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < n; ++k) {
      const double aik = a[i * n + k];
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) c[i * n + j] += aik * b[k * n + j];
    }
  return c;
}

SemigroupTable dense_scaling_squaring(const GeneratorMatrix& gen, double t,
                                      double tol) {
  const std::size_t n = static_cast<std::size_t>(gen.size());
  const int deg = gen.torus.degree();
  std::vector<double> a(n * n, 0.0);
  for (std::size_t x = 0; x < n; ++x) {
    a[x * n + x] -= static_cast<double>(gen.exit[x]) * t;
    for (int k = 0; k < deg; ++k)
      a[x * n + gen.torus.neighbor(static_cast<Site>(x), k)] +=
          static_cast<double>(gen.q(static_cast<Site>(x), k)) * t;
  }
  const double norm = 2.0 * static_cast<double>(gen.max_exit_rate()) * t;
  int s = 0;
  while (std::ldexp(norm, -s) > 0.5) ++s;
  for (auto& v : a) v = std::ldexp(v, -s);
  // Taylor series of exp(B) with ||B|| <= 1/2
  std::vector<double> e(n * n, 0.0), term(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) e[i * n + i] = term[i * n + i] = 1.0;
  for (int k = 1; k < 60; ++k) {
    term = matmul(term, a, n);
    double tn = 0.0;
    for (auto& v : term) {
      v /= k;
      tn = std::max(tn, std::fabs(v));
    }
    for (std::size_t i = 0; i < n * n; ++i) e[i] += term[i];
    if (tn * static_cast<double>(n) < tol * 1e-3) break;
  }
  for (int i = 0; i < s; ++i) e = matmul(e, e, n);
  SemigroupTable tab;
  tab.t = t;
  tab.n = static_cast<Site>(n);
  tab.tol = tol;
  tab.method = SemigroupMethod::scaling_squaring;
  tab.p = std::move(e);
  return tab;
}

}  // namespace

std::vector<std::vector<double>> semigroup_apply(const GeneratorMatrix& gen,
                                                 const std::vector<double>& f,
                                                 const std::vector<double>& times,
                                                 double tol) {
  return uniformized<false>(gen, f, times, tol);
}

std::vector<std::vector<double>> semigroup_apply_left(
    const GeneratorMatrix& gen, const std::vector<double>& mu,
    const std::vector<double>& times, double tol) {
  return uniformized<true>(gen, mu, times, tol);
}

SemigroupTable semigroup(const GeneratorMatrix& gen, double t, double tol,
                         SemigroupMethod method) {
  if (!(tol > 0.0)) throw std::invalid_argument("semigroup: tol must be > 0");
  if (t < 0.0) throw std::invalid_argument("semigroup: t must be >= 0");
  if (gen.size() > kDenseCap)
    throw std::invalid_argument(
        "semigroup: dense output is limited to 4096 sites; use semigroup_apply");
  SemigroupTable tab = method == SemigroupMethod::uniformization
                           ? dense_uniformization(gen, t, tol)
                           : dense_scaling_squaring(gen, t, tol);
  for (auto& v : tab.p) v = std::clamp(v, 0.0, 1.0);
  return tab;
}

double heat_kernel(const Environment& env, double t, Site x, Site y, double tol) {
  const auto gen = make_generator(env, WalkKind::alpha_walk);
  std::vector<double> delta(static_cast<std::size_t>(env.size()), 0.0);
  delta[x] = 1.0;
  const auto row = semigroup_apply_left(gen, delta, {t}, tol)[0];
  return std::clamp(row[y], 0.0, 1.0) / env[y];
}

BoundReport heat_kernel_bound_check(const Environment& env,
                                    const std::vector<double>& t_grid,
                                    double tol) {
  const auto gen = make_generator(env, WalkKind::alpha_walk);
  const double d = static_cast<double>(env.dim());
  BoundReport rep;
  for (double t : t_grid) {
    const auto tab = semigroup(gen, t, tol);
    const double scale = std::max(1.0, std::pow(t, d / 2.0));
    const double len = std::max(1.0, std::sqrt(t));
    for (Site x = 0; x < env.size(); ++x)
      for (Site y = 0; y < env.size(); ++y) {
        const double p = tab(x, y);
        const double c = p * scale * std::exp(env.torus.euclidean_distance(x, y) / len);
        if (c > rep.c) rep = {c, t, x, y, p};
      }
  }
  return rep;
}

double dirichlet_form(const Environment& env, const std::vector<double>& f) {
  KahanSum s;
  for (Site x = 0; x < env.size(); ++x)
    for (int k = 0; k < env.torus.degree(); ++k) {
      const Site y = env.torus.neighbor(x, k);
      const double g = f[y] - f[x];
      s += static_cast<double>(env[x]) * env[y] * g * g;
    }
  return 0.5 * s.value();
}

double nash_ratio(const Environment& env, const std::vector<double>& f) {
  KahanSum l1, l2;
  for (Site x = 0; x < env.size(); ++x) {
    l1 += std::fabs(f[x]) * env[x];
    l2 += f[x] * f[x] * env[x];
  }
  if (l1.value() == 0.0) throw std::invalid_argument("nash_ratio: f is zero");
  const double d = static_cast<double>(env.dim());
  const double n2 = std::sqrt(l2.value());
  return dirichlet_form(env, f) /
         (std::pow(n2, 2.0 + 4.0 / d) * std::pow(l1.value(), -4.0 / d));
}

double inner_alpha(const Environment& env, const std::vector<double>& f,
                   const std::vector<double>& g) {
  KahanSum s;
  for (Site x = 0; x < env.size(); ++x) s += f[x] * g[x] * env[x];
  return s.value();
}

}  // namespace pex

namespace pex {

double chapman_kolmogorov_residual(const Environment& env, double s, double t, double tol) {
  const auto gen = make_generator(env, WalkKind::alpha_walk);
  const auto a = semigroup(gen, s, tol);
  const auto b = semigroup(gen, t, tol);
  const auto c = semigroup(gen, s + t, tol);
  const Site n = env.size();
  const auto rows = parallel_map<double>(static_cast<std::size_t>(n), [&](std::size_t x) {
    std::vector<double> row(static_cast<std::size_t>(n), 0.0);
    for (Site z = 0; z < n; ++z) {
      const double w = a(static_cast<Site>(x), z);
      if (w == 0.0) continue;
      const double* bz = &b.p[static_cast<std::size_t>(z * n)];
      for (Site y = 0; y < n; ++y) row[y] += w * bz[y];
    }
    double worst = 0.0;
    for (Site y = 0; y < n; ++y)
      worst = std::max(worst, std::fabs(row[y] - c(static_cast<Site>(x), y)));
    return worst;
  });
  return *std::max_element(rows.begin(), rows.end());
}

}  // namespace pex
