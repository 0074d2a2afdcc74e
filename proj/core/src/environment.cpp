#include "pex/environment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "pex/rng.hpp"
#include "pex/stats.hpp"

namespace pex {

namespace {

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

int parse_int(const std::string& s) {
  std::size_t pos = 0;
  const int v = std::stoi(s, &pos);
  if (pos != s.size()) throw std::invalid_argument("bad integer '" + s + "'");
  return v;
}

double parse_double(const std::string& s) {
  std::size_t pos = 0;
  const double v = std::stod(s, &pos);
  if (pos != s.size()) throw std::invalid_argument("bad number '" + s + "'");
  return v;
}

int pick(const std::vector<double>& cdf, double u) {
  for (std::size_t i = 0; i + 1 < cdf.size(); ++i)
    if (u < cdf[i]) return static_cast<int>(i);
  return static_cast<int>(cdf.size()) - 1;
}

std::vector<double> cumulative(const std::vector<double>& w) {
  std::vector<double> c(w.size());
  std::partial_sum(w.begin(), w.end(), c.begin());
  return c;
}

}  // namespace

// ---------------------------------------------------------------- Torus

Torus::Torus(std::vector<int> dims) : dims_(std::move(dims)) {
  if (dims_.empty()) throw std::invalid_argument("torus: no dimensions");
  for (int l : dims_)
    if (l < 2) throw std::invalid_argument("torus: every side must be >= 2");
  const std::size_t d = dims_.size();
  strides_.assign(d, 1);
  for (std::size_t i = d - 1; i-- > 0;) strides_[i] = strides_[i + 1] * dims_[i + 1];
  size_ = strides_[0] * dims_[0];
  nbr_.resize(static_cast<std::size_t>(size_) * 2 * d);
  std::vector<int> c(d, 0);
  for (Site x = 0; x < size_; ++x) {
    for (std::size_t i = 0; i < d; ++i) {
      const int up = c[i] + 1 == dims_[i] ? 0 : c[i] + 1;
      const int dn = c[i] == 0 ? dims_[i] - 1 : c[i] - 1;
      nbr_[x * 2 * d + 2 * i] = x + (up - c[i]) * strides_[i];
      nbr_[x * 2 * d + 2 * i + 1] = x + (dn - c[i]) * strides_[i];
    }
    for (std::size_t i = d; i-- > 0;) {
      if (++c[i] < dims_[i]) break;
      c[i] = 0;
    }
  }
}

std::vector<int> Torus::coords(Site x) const {
  std::vector<int> c(dims_.size());
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    c[i] = static_cast<int>(x / strides_[i]);
    x %= strides_[i];
  }
  return c;
}

Site Torus::index(const std::vector<int>& c) const {
  if (c.size() != dims_.size())
    throw std::invalid_argument("torus: coordinate dimension mismatch");
  Site x = 0;
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    int v = c[i] % dims_[i];
    if (v < 0) v += dims_[i];
    x += v * strides_[i];
  }
  return x;
}

int Torus::slot_of(Site x, Site y) const noexcept {
  for (int k = 0; k < degree(); ++k)
    if (neighbor(x, k) == y) return k;
  return -1;
}

int Torus::distance(Site x, Site y) const {
  const auto a = coords(x), b = coords(y);
  int s = 0;
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    const int d = std::abs(a[i] - b[i]);
    s += std::min(d, dims_[i] - d);
  }
  return s;
}

double Torus::euclidean_distance(Site x, Site y) const {
  const auto a = coords(x), b = coords(y);
  double s = 0;
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    const int d = std::abs(a[i] - b[i]);
    const double m = std::min(d, dims_[i] - d);
    s += m * m;
  }
  return std::sqrt(s);
}

// ---------------------------------------------------------------- EnvLaw

std::string to_string(LawKind k) {
  switch (k) {
    case LawKind::iid: return "iid";
    case LawKind::markov_chain_1d_product: return "markov_chain_1d_product";
    case LawKind::constant: return "constant";
  }
  return "?";
}

std::vector<double> stationary_vector(
    const std::vector<std::vector<double>>& p) {
  const std::size_t n = p.size();
  // (P^T - I) pi = 0 with the last equation replaced by sum(pi) = 1
  std::vector<std::vector<double>> a(n, std::vector<double>(n + 1, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) a[i][j] = p[j][i] - (i == j ? 1.0 : 0.0);
  }
  for (std::size_t j = 0; j < n; ++j) a[n - 1][j] = 1.0;
  a[n - 1][n] = 1.0;
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::fabs(a[r][c]) > std::fabs(a[piv][c])) piv = r;
    if (std::fabs(a[piv][c]) < 1e-300)
      throw std::invalid_argument("markov law: transition matrix is reducible");
    std::swap(a[c], a[piv]);
    for (std::size_t r = 0; r < n; ++r) {
      if (r == c) continue;
      const double f = a[r][c] / a[c][c];
      for (std::size_t k = c; k <= n; ++k) a[r][k] -= f * a[c][k];
    }
  }
  std::vector<double> pi(n);
  for (std::size_t i = 0; i < n; ++i) pi[i] = a[i][n] / a[i][i];
  return pi;
}

EnvLaw EnvLaw::constant(int value) {
  EnvLaw l;
  l.kind = LawKind::constant;
  l.support = {value};
  l.weights = {1.0};
  return l;
}

EnvLaw EnvLaw::iid(std::vector<int> support, std::vector<double> weights) {
  EnvLaw l;
  l.kind = LawKind::iid;
  l.support = std::move(support);
  if (weights.empty())
    weights.assign(l.support.size(), 1.0 / static_cast<double>(l.support.size()));
  l.weights = std::move(weights);
  return l;
}

EnvLaw EnvLaw::markov(std::vector<int> support,
                      std::vector<std::vector<double>> transition,
                      std::vector<double> weights) {
  EnvLaw l;
  l.kind = LawKind::markov_chain_1d_product;
  l.support = std::move(support);
  l.transition = std::move(transition);
  l.weights = weights.empty() ? stationary_vector(l.transition) : std::move(weights);
  return l;
}

EnvLaw EnvLaw::parse(std::string_view s) {
  const auto colon = s.find(':');
  if (colon == std::string_view::npos)
    throw std::invalid_argument("law '" + std::string(s) +
                                "': expected kind:parameters");
  const std::string kind(s.substr(0, colon));
  const std::string rest(s.substr(colon + 1));
  EnvLaw law;
  if (kind == "const" || kind == "constant") {
    law = EnvLaw::constant(parse_int(rest));
  } else if (kind == "iid") {
    const auto at = split(rest, '@');
    std::vector<int> sup;
    for (const auto& v : split(at[0], ',')) sup.push_back(parse_int(v));
    std::vector<double> w;
    if (at.size() == 2)
      for (const auto& v : split(at[1], ',')) w.push_back(parse_double(v));
    else if (at.size() > 2)
      throw std::invalid_argument("law '" + std::string(s) + "': stray '@'");
    law = EnvLaw::iid(std::move(sup), std::move(w));
  } else if (kind == "markov") {
    const auto bar = split(rest, '|');
    if (bar.size() != 2)
      throw std::invalid_argument("law '" + std::string(s) +
                                  "': expected markov:support|P");
    std::vector<int> sup;
    for (const auto& v : split(bar[0], ',')) sup.push_back(parse_int(v));
    std::vector<std::vector<double>> p;
    for (const auto& row : split(bar[1], ';')) {
      p.emplace_back();
      for (const auto& v : split(row, ',')) p.back().push_back(parse_double(v));
    }
    law = EnvLaw::markov(std::move(sup), std::move(p));
  } else {
    throw std::invalid_argument("law '" + std::string(s) + "': unknown kind '" +
                                kind + "'");
  }
  law.validate();
  return law;
}

int EnvLaw::ceiling() const {
  if (c_max > 0) return c_max;
  return support.empty() ? 0 : *std::max_element(support.begin(), support.end());
}

void EnvLaw::validate() const {
  if (support.empty()) throw std::invalid_argument("law: empty support");
  if (weights.size() != support.size())
    throw std::invalid_argument("law: weights and support differ in length");
  const int cm = ceiling();
  for (std::size_t i = 0; i < support.size(); ++i) {
    if (support[i] < 1 || support[i] > cm)
      throw std::invalid_argument("law: support value " +
                                  std::to_string(support[i]) +
                                  " outside [1, c_max=" + std::to_string(cm) + "]");
    for (std::size_t j = 0; j < i; ++j)
      if (support[i] == support[j])
        throw std::invalid_argument("law: repeated support value");
  }
  double s = 0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw std::invalid_argument("law: negative weight");
    s += w;
  }
  if (std::fabs(s - 1.0) > 1e-12)
    throw std::invalid_argument("law: weights sum to " + std::to_string(s) +
                                ", not 1");
  if (kind == LawKind::constant && support.size() != 1)
    throw std::invalid_argument("law: constant kind needs a single value");
  if (kind == LawKind::markov_chain_1d_product) {
    const std::size_t n = support.size();
    if (transition.size() != n)
      throw std::invalid_argument("law: transition matrix has wrong size");
    for (const auto& row : transition) {
      if (row.size() != n)
        throw std::invalid_argument("law: transition matrix has wrong size");
      double rs = 0;
      for (double v : row) {
        if (!(v >= 0.0))
          throw std::invalid_argument("law: negative transition probability");
        rs += v;
      }
      if (std::fabs(rs - 1.0) > 1e-12)
        throw std::invalid_argument("law: transition row does not sum to 1");
    }
    for (std::size_t j = 0; j < n; ++j) {
      double v = 0;
      for (std::size_t i = 0; i < n; ++i) v += weights[i] * transition[i][j];
      if (std::fabs(v - weights[j]) > 1e-10)
        throw std::invalid_argument(
            "law: weights are not stationary for the transition matrix");
    }
  }
}

double EnvLaw::mean() const {
  double m = 0;
  for (std::size_t i = 0; i < support.size(); ++i) m += weights[i] * support[i];
  return m;
}

double EnvLaw::mean_inverse() const {
  double m = 0;
  for (std::size_t i = 0; i < support.size(); ++i) m += weights[i] / support[i];
  return m;
}

std::string EnvLaw::describe() const {
  std::ostringstream os;
  os.precision(17);
  switch (kind) {
    case LawKind::constant: os << "const:" << support[0]; break;
    case LawKind::iid:
      os << "iid:";
      for (std::size_t i = 0; i < support.size(); ++i) os << (i ? "," : "") << support[i];
      os << "@";
      for (std::size_t i = 0; i < weights.size(); ++i) os << (i ? "," : "") << weights[i];
      break;
    case LawKind::markov_chain_1d_product:
      os << "markov:";
      for (std::size_t i = 0; i < support.size(); ++i) os << (i ? "," : "") << support[i];
      os << "|";
      for (std::size_t i = 0; i < transition.size(); ++i) {
        if (i) os << ";";
        for (std::size_t j = 0; j < transition[i].size(); ++j)
          os << (j ? "," : "") << transition[i][j];
      }
      break;
  }
  return os.str();
}

nlohmann::json EnvLaw::to_json() const {
  nlohmann::json j = {{"kind", to_string(kind)},
                      {"support", support},
                      {"weights", weights},
                      {"c_max", ceiling()}};
  if (kind == LawKind::markov_chain_1d_product) j["transition"] = transition;
  return j;
}

EnvLaw EnvLaw::from_json(const nlohmann::json& j) {
  EnvLaw l;
  const auto k = j.at("kind").get<std::string>();
  if (k == "iid")
    l.kind = LawKind::iid;
  else if (k == "markov_chain_1d_product")
    l.kind = LawKind::markov_chain_1d_product;
  else if (k == "constant")
    l.kind = LawKind::constant;
  else
    throw std::invalid_argument("law: unknown kind '" + k + "'");
  l.support = j.at("support").get<std::vector<int>>();
  l.weights = j.at("weights").get<std::vector<double>>();
  l.c_max = j.value("c_max", 0);
  if (j.contains("transition"))
    l.transition = j.at("transition").get<std::vector<std::vector<double>>>();
  l.validate();
  return l;
}

// ---------------------------------------------------------------- Environment

Environment::Environment(std::vector<int> dims, std::vector<int> a, int cm)
    : torus(std::move(dims)), alpha(std::move(a)) {
  if (static_cast<Site>(alpha.size()) != torus.size())
    throw std::invalid_argument("environment: alpha has wrong length");
  c_max = cm > 0 ? cm : *std::max_element(alpha.begin(), alpha.end());
  check_ellipticity();
}

void Environment::check_ellipticity() const {
  for (std::size_t x = 0; x < alpha.size(); ++x)
    if (alpha[x] < 1 || alpha[x] > c_max)
      throw std::domain_error("environment: alpha[" + std::to_string(x) +
                              "] = " + std::to_string(alpha[x]) +
                              " outside [1, " + std::to_string(c_max) + "]");
}

std::uint64_t Environment::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](std::uint64_t v) {
    for (int b = 0; b < 8; ++b) {
      h ^= (v >> (8 * b)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  };
  feed(dims().size());
  for (int l : dims()) feed(static_cast<std::uint64_t>(l));
  for (int a : alpha) feed(static_cast<std::uint64_t>(a));
  return h;
}

double Environment::empirical_mean() const {
  std::int64_t s = 0;
  for (int a : alpha) s += a;
  return static_cast<double>(s) / static_cast<double>(alpha.size());
}

nlohmann::json Environment::to_json() const {
  nlohmann::json j = {{"dims", dims()}, {"c_max", c_max}, {"seed", seed},
                      {"alpha", alpha}};
  j["law"] = law ? law->to_json() : nlohmann::json(nullptr);
  return j;
}

Environment Environment::from_json(const nlohmann::json& j) {
  Environment e(j.at("dims").get<std::vector<int>>(),
                j.at("alpha").get<std::vector<int>>(), j.at("c_max").get<int>());
  e.seed = j.value("seed", std::uint64_t{0});
  if (j.contains("law") && !j.at("law").is_null())
    e.law = EnvLaw::from_json(j.at("law"));
  return e;
}

Environment sample_environment(const EnvLaw& law, const std::vector<int>& dims,
                               std::uint64_t seed) {
  law.validate();
  Torus torus(dims);
  const Site n = torus.size();
  std::vector<int> a(static_cast<std::size_t>(n));
  Rng rng(seed);
  switch (law.kind) {
    case LawKind::constant:
      std::fill(a.begin(), a.end(), law.support[0]);
      break;
    case LawKind::iid: {
      const auto cdf = cumulative(law.weights);
      for (auto& v : a) v = law.support[pick(cdf, rng.uniform())];
      break;
    }
    case LawKind::markov_chain_1d_product: {
      // independent stationary chains along axis 0, one per transverse fiber
      const auto cdf0 = cumulative(law.weights);
      std::vector<std::vector<double>> cdfs;
      for (const auto& row : law.transition) cdfs.push_back(cumulative(row));
      const Site stride = n / dims[0];
      for (Site f = 0; f < stride; ++f) {
        int state = pick(cdf0, rng.uniform());
        a[f] = law.support[state];
        for (int x0 = 1; x0 < dims[0]; ++x0) {
          state = pick(cdfs[state], rng.uniform());
          a[x0 * stride + f] = law.support[state];
        }
      }
      break;
    }
  }
  Environment env(dims, std::move(a), law.ceiling());
  env.law = law;
  env.seed = seed;
  return env;
}

// ---------------------------------------------------------------- conductances

std::vector<std::pair<Site, Site>> ConductanceField::bonds() const {
  std::vector<std::pair<Site, Site>> out;
  for (Site x = 0; x < torus.size(); ++x)
    for (std::size_t i = 0; i < torus.dim(); ++i)
      out.emplace_back(x, torus.neighbor(x, static_cast<int>(2 * i)));
  return out;
}

std::vector<std::int64_t> ConductanceField::bond_values() const {
  std::vector<std::int64_t> out;
  for (Site x = 0; x < torus.size(); ++x)
    for (std::size_t i = 0; i < torus.dim(); ++i)
      out.push_back((*this)(x, static_cast<int>(2 * i)));
  return out;
}

ConductanceField conductances(const Environment& env) {
  ConductanceField c;
  c.torus = env.torus;
  const int deg = env.torus.degree();
  c.omega.resize(static_cast<std::size_t>(env.size()) * deg);
  for (Site x = 0; x < env.size(); ++x)
    for (int k = 0; k < deg; ++k)
      c.omega[x * deg + k] = static_cast<std::int64_t>(env[x]) *
                             env[env.torus.neighbor(x, k)];
  return c;
}

// ---------------------------------------------------------------- averages

std::vector<double> lattice_values(const Torus& torus, const TestFunction& f,
                                   double n) {
  const std::size_t d = torus.dim();
  if (f.dim() != d)
    throw std::invalid_argument("test function dimension does not match torus");
  std::vector<double> period(d), u(d);
  for (std::size_t i = 0; i < d; ++i) period[i] = torus.dims()[i] / n;
  std::vector<double> out(static_cast<std::size_t>(torus.size()));
  std::vector<int> c(d, 0);
  for (Site x = 0; x < torus.size(); ++x) {
    for (std::size_t i = 0; i < d; ++i) u[i] = c[i] / n;
    out[x] = f.at(u.data(), period.data());
    for (std::size_t i = d; i-- > 0;) {
      if (++c[i] < torus.dims()[i]) break;
      c[i] = 0;
    }
  }
  return out;
}

double ergodic_average(const Environment& env, const TestFunction& f, int n) {
  if (n <= 0) throw std::invalid_argument("ergodic_average: N must be positive");
  if (f.kind() != BumpKind::constant) {
    for (int l : env.dims())
      if (2.0 * f.radius() * n >= l)
        throw std::invalid_argument(
            "ergodic_average: rescaled support of F does not fit in the torus");
  }
  const auto g = lattice_values(env.torus, f, n);
  KahanSum s;
  for (Site x = 0; x < env.size(); ++x) s += g[x] * env[x];
  return s.value() / std::pow(static_cast<double>(n), static_cast<double>(env.dim()));
}

Environment translate(const Environment& env, const std::vector<int>& shift) {
  if (shift.size() != env.dim())
    throw std::invalid_argument("translate: shift dimension mismatch");
  Environment out = env;
  std::vector<int> c;
  for (Site x = 0; x < env.size(); ++x) {
    c = env.torus.coords(x);
    for (std::size_t i = 0; i < c.size(); ++i) c[i] += shift[i];
    out.alpha[x] = env[env.torus.index(c)];
  }
  return out;
}

}  // namespace pex
