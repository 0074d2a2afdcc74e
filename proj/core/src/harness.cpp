#include "pex/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <boost/math/distributions/normal.hpp>

#include "pex/environment.hpp"
#include "pex/exclusion.hpp"
#include "pex/homogenization.hpp"
#include "pex/hydrodynamics.hpp"
#include "pex/parallel.hpp"
#include "pex/random_walk.hpp"
#include "pex/rng.hpp"
#include "pex/semigroup.hpp"
#include "pex/stats.hpp"

namespace pex {

std::string to_string(Command c) {
  switch (c) {
    case Command::env: return "env";
    case Command::walk: return "walk";
    case Command::sep: return "sep";
    case Command::homog: return "homog";
    case Command::hdl: return "hdl";
    case Command::check_all: return "check-all";
  }
  return "?";
}

Command command_from_string(std::string_view s) {
  if (s == "env") return Command::env;
  if (s == "walk") return Command::walk;
  if (s == "sep") return Command::sep;
  if (s == "homog") return Command::homog;
  if (s == "hdl") return Command::hdl;
  if (s == "check-all" || s == "check_all") return Command::check_all;
  throw ConfigError("command", "unknown command '" + std::string(s) +
                                   "' (expected env|walk|sep|homog|hdl|check-all)");
}

namespace {

std::string where(const std::string& field, int line) {
  std::string s = line > 0 ? "line " + std::to_string(line) + ": " : std::string();
  return s + "field '" + field + "': ";
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t b = 0;
  for (std::size_t i = 0; i <= s.size(); ++i)
    if (i == s.size() || s[i] == sep) {
      auto t = trim(s.substr(b, i - b));
      if (!t.empty()) out.push_back(std::move(t));
      b = i + 1;
    }
  return out;
}

template <class T>
T parse_number(const std::string& key, const std::string& v, int line) {
  try {
    std::size_t pos = 0;
    T out{};
    if constexpr (std::is_same_v<T, double>) {
      out = std::stod(v, &pos);
    } else if constexpr (std::is_signed_v<T>) {
      out = static_cast<T>(std::stoll(v, &pos));
    } else {
      if (!v.empty() && v[0] == '-') throw std::invalid_argument(v);
      out = static_cast<T>(std::stoull(v, &pos, 0));
    }
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError(key, "cannot parse '" + v + "'", line);
  }
}

template <class T>
std::vector<T> parse_list(const std::string& key, const std::string& v, int line) {
  std::vector<T> out;
  for (const auto& p : split(v, ',')) out.push_back(parse_number<T>(key, p, line));
  if (out.empty()) throw ConfigError(key, "empty list", line);
  return out;
}

}  // namespace

ConfigError::ConfigError(std::string field, const std::string& msg, int line)
    : std::invalid_argument(where(field, line) + msg), field_(std::move(field)), line_(line) {}

const std::vector<std::string>& ExperimentConfig::keys() {
  static const std::vector<std::string> k{
      "command", "law",   "dims",   "n_grid",  "horizon", "t_grid",    "replicas",
      "envs",    "seed",  "threads", "out",    "format",  "kind",      "profile",
      "g",       "sigma", "event_cap", "x0",   "density", "tol"};
  return k;
}

void ExperimentConfig::set(std::string_view key_in, std::string_view value_in, int line) {
  std::string key(trim(key_in));
  std::replace(key.begin(), key.end(), '-', '_');
  if (key == "N_grid") key = "n_grid";
  const std::string v = trim(value_in);
  if (key == "command") command = command_from_string(v);
  else if (key == "law") law = v;
  else if (key == "dims") dims = parse_list<int>(key, v, line);
  else if (key == "n_grid") n_grid = parse_list<int>(key, v, line);
  else if (key == "horizon") horizon = parse_number<double>(key, v, line);
  else if (key == "t_grid") t_grid = parse_list<double>(key, v, line);
  else if (key == "replicas") replicas = parse_number<std::uint64_t>(key, v, line);
  else if (key == "envs") envs = parse_number<std::uint64_t>(key, v, line);
  else if (key == "seed") seed = parse_number<std::uint64_t>(key, v, line);
  else if (key == "threads") threads = parse_number<unsigned>(key, v, line);
  else if (key == "out") out = v;
  else if (key == "format") {
    if (v == "json") format = OutputFormat::json;
    else if (v == "csv") format = OutputFormat::csv;
    else if (v == "both") format = OutputFormat::both;
    else throw ConfigError(key, "expected json|csv|both, got '" + v + "'", line);
  } else if (key == "kind") kind = v;
  else if (key == "profile") profile = v;
  else if (key == "g") {
    g = split(v, ';');
    if (g.empty()) throw ConfigError(key, "empty test-function list", line);
  } else if (key == "sigma") sigma = v;
  else if (key == "event_cap") event_cap = parse_number<double>(key, v, line);
  else if (key == "x0") x0 = parse_number<std::int64_t>(key, v, line);
  else if (key == "density") density = parse_number<double>(key, v, line);
  else if (key == "tol") tol = parse_number<double>(key, v, line);
  else throw ConfigError(key, "unknown key", line);
  given.insert(key);
}

void ExperimentConfig::load(std::istream& is, const std::string& origin) {
  std::string raw;
  int line = 0;
  while (std::getline(is, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string s = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (s.empty()) continue;
    const auto eq = s.find('=');
    if (eq == std::string::npos)
      throw ConfigError(trim(s), origin + ": expected 'key = value'", line);
    set(s.substr(0, eq), s.substr(eq + 1), line);
  }
}

void ExperimentConfig::load_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("config", "cannot open '" + path + "'");
  load(is, path);
}

void ExperimentConfig::validate() const {
  auto require = [&](const char* k) {
    if (!given.count(k)) throw ConfigError(k, "required for '" + to_string(command) + "'");
  };
  require("command");
  require("seed");
  require("law");
  try {
    EnvLaw::parse(law).validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("law", e.what());
  }
  if (threads == 0) throw ConfigError("threads", "must be positive");
  if (replicas == 0) throw ConfigError("replicas", "must be positive");
  if (envs == 0) throw ConfigError("envs", "must be positive");
  if (!(tol > 0.0)) throw ConfigError("tol", "must be positive");
  for (int l : dims)
    if (l < 2) throw ConfigError("dims", "sides must be >= 2");
  if (dims.empty()) throw ConfigError("dims", "empty");
  switch (command) {
    case Command::env:
    case Command::check_all: require("dims"); break;
    case Command::walk:
    case Command::sep:
    case Command::homog:
      require("dims");
      require("horizon");
      if (!(horizon > 0.0)) throw ConfigError("horizon", "must be positive");
      break;
    case Command::hdl:
      require("n_grid");
      require("t_grid");
      for (int n : n_grid)
        if (n < 2) throw ConfigError("n_grid", "scales must be >= 2");
      for (double t : t_grid)
        if (!(t >= 0.0)) throw ConfigError("t_grid", "times must be >= 0");
      break;
  }
  if (command == Command::walk && !kind.empty() && kind != "alpha" && kind != "omega" &&
      kind != "alpha_walk" && kind != "omega_walk")
    throw ConfigError("kind", "expected alpha|omega for walk");
  if (command == Command::sep && !kind.empty() && kind != "direct" && kind != "ladder")
    throw ConfigError("kind", "expected direct|ladder for sep");
  if (!(density >= 0.0 && density <= 1.0)) throw ConfigError("density", "must lie in [0,1]");
}

nlohmann::ordered_json ExperimentConfig::to_json() const {
  nlohmann::ordered_json j;
  j["command"] = to_string(command);
  j["law"] = law;
  j["dims"] = dims;
  j["n_grid"] = n_grid;
  j["horizon"] = horizon;
  j["t_grid"] = t_grid;
  j["replicas"] = replicas;
  j["envs"] = envs;
  j["seed"] = seed;
  j["threads"] = threads;
  j["format"] = format == OutputFormat::json ? "json" : format == OutputFormat::csv ? "csv" : "both";
  j["kind"] = kind;
  j["profile"] = profile;
  j["g"] = g;
  j["sigma"] = sigma;
  j["event_cap"] = event_cap;
  j["x0"] = x0;
  j["density"] = density;
  j["tol"] = tol;
  return j;
}

std::uint64_t seed_schedule(std::uint64_t root, std::string_view kind, std::uint64_t env_index,
                            std::uint64_t replica_index) {
  return derive_seed(root, fnv1a(kind), env_index, replica_index);
}

// ---------------------------------------------------------------- commands

namespace {

struct Outcome {
  nlohmann::ordered_json result;
  std::string csv;
  bool pass = true;
};

Environment make_env(const ExperimentConfig& c, std::uint64_t index = 0) {
  return sample_environment(EnvLaw::parse(c.law), c.dims, seed_schedule(c.seed, "env", index, 0));
}

nlohmann::ordered_json env_summary(const Environment& env) {
  nlohmann::ordered_json j;
  j["dims"] = env.dims();
  j["hash"] = env.hash();
  j["c_max"] = env.c_max;
  j["empirical_mean"] = env.empirical_mean();
  return j;
}

Outcome cmd_env(const ExperimentConfig& c) {
  Outcome o;
  for (std::uint64_t e = 0; e < c.envs; ++e) {
    const auto env = make_env(c, e);
    env.check_ellipticity();
    auto j = env_summary(env);
    const auto cf = conductances(env);
    const auto bv = cf.bond_values();
    RunningStats w;
    for (auto v : bv) w.push(static_cast<double>(v));
    j["omega_mean"] = w.mean();
    j["alpha"] = env.alpha;
    o.result["environments"].push_back(j);
    if (o.csv.empty()) o.csv = "env,site,alpha\n";
    for (Site x = 0; x < env.size(); ++x)
      o.csv += std::to_string(e) + ',' + std::to_string(x) + ',' + std::to_string(env[x]) + '\n';
  }
  return o;
}

Outcome cmd_walk(const ExperimentConfig& c) {
  const auto env = make_env(c);
  const WalkKind kind = walk_kind_from_string(c.kind.empty() ? "alpha" : c.kind);
  if (c.x0 < 0 || c.x0 >= env.size()) throw ConfigError("x0", "outside the torus");
  const auto trajs = parallel_map<Trajectory>(c.replicas, [&](std::size_t r) {
    auto tr = simulate_walk(env, kind, c.x0, c.horizon, seed_schedule(c.seed, "walk", 0, r));
    tr.validate(env.torus);
    return tr;
  });
  RunningStats jumps, msd;
  for (const auto& tr : trajs) {
    jumps.push(static_cast<double>(tr.events.size()));
    const auto d = tr.displacement_at(c.horizon, env.dim());
    double s = 0.0;
    for (int v : d) s += static_cast<double>(v) * v;
    msd.push(s);
  }
  Outcome o;
  o.result["environment"] = env_summary(env);
  o.result["kind"] = to_string(kind);
  o.result["mean_jumps"] = jumps.mean();
  o.result["mean_jumps_stderr"] = jumps.stderr_mean();
  o.result["msd"] = msd.mean();
  o.result["msd_stderr"] = msd.stderr_mean();
  std::ostringstream os;
  write_trajectories_csv(os, trajs);
  o.csv = os.str();
  return o;
}

Outcome cmd_sep(const ExperimentConfig& c) {
  const auto env = make_env(c);
  const bool ladder = c.kind == "ladder";
  const auto trajs = parallel_map<SepTrajectory>(c.replicas, [&](std::size_t r) {
    const auto cfg0 =
        binomial_measure_sampler(env, c.density, seed_schedule(c.seed, "sep-init", 0, r));
    const auto s = seed_schedule(c.seed, "sep", 0, r);
    return ladder ? simulate_sep_ladder(env, LadderConfig::lift(env, cfg0), c.horizon, s)
                  : simulate_sep_direct(env, cfg0, c.horizon, s);
  });
  bool conserved = true;
  RunningStats events;
  std::vector<KahanSum> occ(static_cast<std::size_t>(env.size()));
  for (const auto& tr : trajs) {
    tr.validate(env);
    const auto fin = tr.config_at(env, c.horizon);
    conserved = conserved && particle_count(fin) == particle_count(tr.initial);
    events.push(static_cast<double>(tr.events.size()));
    for (Site x = 0; x < env.size(); ++x) occ[x] += fin[x];
  }
  Outcome o;
  o.result["environment"] = env_summary(env);
  o.result["dynamics"] = ladder ? "ladder" : "direct";
  o.result["mean_events"] = events.mean();
  o.result["mass_conserved"] = conserved;
  std::vector<double> mean_density;
  for (Site x = 0; x < env.size(); ++x)
    mean_density.push_back(occ[x].value() / static_cast<double>(c.replicas) / env[x]);
  o.result["mean_density_over_alpha"] = mean_density;
  o.pass = conserved;
  std::ostringstream os;
  write_sep_csv(os, trajs);
  o.csv = os.str();
  return o;
}

Outcome cmd_homog(const ExperimentConfig& c) {
  const EnvLaw law = EnvLaw::parse(c.law);
  const SigmaMethod m = sigma_method_from_string(c.kind.empty() ? "alpha" : c.kind);
  const auto env = make_env(c);
  const auto est = m == SigmaMethod::corrector_1d
                       ? corrector_1d(env)
                       : estimate_sigma_msd(env, m, c.horizon, c.replicas,
                                            seed_schedule(c.seed, "homog", 0, 0));
  Outcome o;
  o.result["environment"] = env_summary(env);
  o.result["estimate"] = est.to_json();
  o.pass = est.valid();
  if (c.dims.size() == 1 && law.kind != LawKind::markov_chain_1d_product) {
    const double oracle = sigma_oracle_1d(law);
    o.result["oracle"] = oracle;
    o.result["relative_error"] = std::fabs(est.sigma(0, 0) - oracle) / oracle;
  }
  return o;
}

Matrix resolve_sigma(const ExperimentConfig& c, const EnvLaw& law, std::size_t d) {
  if (c.sigma == "oracle") {
    try {
      return Matrix(1, sigma_oracle_1d(law, d));
    } catch (const std::invalid_argument& e) {
      throw ConfigError("sigma", e.what());
    }
  }
  double v = 0.0;
  try {
    std::size_t pos = 0;
    v = std::stod(c.sigma, &pos);
    if (pos != c.sigma.size()) throw std::invalid_argument(c.sigma);
  } catch (const std::exception&) {
    throw ConfigError("sigma", "expected 'oracle' or a positive number");
  }
  if (!(v > 0.0)) throw ConfigError("sigma", "must be positive");
  Matrix s(d);
  for (std::size_t i = 0; i < d; ++i) s(i, i) = v;
  return s;
}

Outcome cmd_hdl(const ExperimentConfig& c) {
  HdlConfig h;
  h.law = EnvLaw::parse(c.law);
  h.d = c.given.count("dims") ? c.dims.size() : 1;
  h.n_grid = c.n_grid;
  try {
    h.rho = MacroscopicProfile::parse(c.profile, h.d);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("profile", e.what());
  }
  for (const auto& s : c.g) {
    try {
      h.g_list.push_back(TestFunction::parse(s, h.d));
    } catch (const std::invalid_argument& e) {
      throw ConfigError("g", e.what());
    }
  }
  h.t_grid = c.t_grid;
  h.sigma = resolve_sigma(c, h.law, h.d);
  h.sigma_source = c.sigma;
  h.envs = c.envs;
  h.replicas = c.replicas;
  h.seed = seed_schedule(c.seed, "hdl", 0, 0);
  h.event_cap = c.event_cap;
  const auto rep = hdl_experiment(h);
  Outcome o;
  o.result = nlohmann::ordered_json::parse(rep.to_json().dump());
  o.result["sigma"] = h.sigma(0, 0);
  o.pass = rep.pass;
  std::ostringstream os;
  rep.write_csv(os);
  o.csv = os.str();
  return o;
}

nlohmann::ordered_json suite(const std::string& name, bool pass, const nlohmann::json& body) {
  nlohmann::ordered_json j;
  j["name"] = name;
  j["pass"] = pass;
  j["details"] = nlohmann::ordered_json::parse(body.dump());
  return j;
}

Outcome cmd_check_all(const ExperimentConfig& c) {
  const auto env = make_env(c);
  Outcome o;
  o.result["environment"] = env_summary(env);
  auto& suites = o.result["suites"];
  auto add = [&](nlohmann::ordered_json s) {
    o.pass = o.pass && s["pass"].get<bool>();
    suites.push_back(std::move(s));
  };

  {  // single-particle duality
    Rng rng(seed_schedule(c.seed, "check-duality", 0, 0));
    DualityReport rep;
    for (int i = 0; i < 200; ++i) {
      const auto cfg = binomial_measure_sampler(env, rng.uniform(), rng());
      rep.merge(duality_check(env, cfg, static_cast<Site>(rng.below(env.size()))));
    }
    add(suite("duality", rep.max_abs_residual <= 1e-12, rep.to_json()));
  }
  {  // product duality, up to 3 dual particles
    Rng rng(seed_schedule(c.seed, "check-multi-duality", 0, 0));
    DualityReport rep;
    for (int i = 0; i < 50; ++i) {
      const auto eta = binomial_measure_sampler(env, rng.uniform(), rng());
      ParticleConfig xi(static_cast<std::size_t>(env.size()), 0);
      const int k = 1 + static_cast<int>(rng.below(3));
      for (int j = 0; j < k; ++j) {
        const Site x = static_cast<Site>(rng.below(env.size()));
        if (xi[x] < env[x]) ++xi[x];
      }
      rep.merge(multi_duality_check(env, xi, eta));
    }
    add(suite("multi_duality", rep.max_abs_residual <= 1e-12, rep.to_json()));
  }
  {
    const auto rep = reversibility_check(env, c.density, 10000,
                                         seed_schedule(c.seed, "check-reversibility", 0, 0));
    add(suite("reversibility", rep.pass, rep.to_json()));
  }
  if (env.size() <= 1024) {  // dense detailed balance and Chapman-Kolmogorov
    nlohmann::json body = nlohmann::json::object();
    bool pass = true;
    const auto gen = make_generator(env, WalkKind::alpha_walk);
    for (double t : {0.5, 1.0, 2.0}) {
      const auto tab = semigroup(gen, t, c.tol);
      const double rev = tab.reversibility_residual(env);
      const double rows = tab.row_sum_residual();
      const double ck = chapman_kolmogorov_residual(env, t / 2, t / 2, c.tol);
      body["t=" + std::to_string(t)] = {{"reversibility", rev}, {"row_sum", rows}, {"chapman_kolmogorov", ck}};
      pass = pass && rev <= 10 * c.tol && rows <= 10 * c.tol && ck <= 100 * c.tol;
    }
    add(suite("detailed_balance", pass, body));
  }
  {
    const auto cfg0 =
        binomial_measure_sampler(env, c.density, seed_schedule(c.seed, "check-ladder-init", 0, 0));
    // one z-test per site: Bonferroni at 1% family-wise
    const double z = boost::math::quantile(
        boost::math::complement(boost::math::normal(), 0.005 / static_cast<double>(env.size())));
    const auto rep = ladder_equivalence_check(env, cfg0, 1.0, c.replicas,
                                              seed_schedule(c.seed, "check-ladder", 0, 0), z);
    add(suite("ladder_equivalence", rep.pass, rep.to_json()));
  }
  {
    const auto rep = time_change_equivalence(env, 0, {0.5, 1.0, 2.0}, c.replicas,
                                             seed_schedule(c.seed, "check-timechange", 0, 0));
    add(suite("time_change", rep.pass, rep.to_json()));
  }
  return o;
}

}  // namespace

RunResult run(const ExperimentConfig& cfg) {
  RunResult rr;
  rr.report["config"] = cfg.to_json();
  try {
    cfg.validate();
    set_threads(cfg.threads);
    Outcome o;
    switch (cfg.command) {
      case Command::env: o = cmd_env(cfg); break;
      case Command::walk: o = cmd_walk(cfg); break;
      case Command::sep: o = cmd_sep(cfg); break;
      case Command::homog: o = cmd_homog(cfg); break;
      case Command::hdl: o = cmd_hdl(cfg); break;
      case Command::check_all: o = cmd_check_all(cfg); break;
    }
    rr.report["result"] = std::move(o.result);
    rr.report["pass"] = o.pass;
    rr.csv = std::move(o.csv);
    rr.exit_code = o.pass ? 0 : 1;
    if (!o.pass) rr.message = to_string(cfg.command) + ": at least one check failed";
  } catch (const ConfigError& e) {
    rr.exit_code = 2;
    rr.message = std::string("invalid config: ") + e.what();
    rr.report["error"] = {{"field", e.field()}, {"message", e.what()}};
  } catch (const BudgetExceeded& e) {
    rr.exit_code = 3;
    rr.message = e.what();
    rr.report["error"] = {{"projected_events", e.projected()}, {"cap", e.cap()}, {"message", e.what()}};
  } catch (const std::invalid_argument& e) {
    rr.exit_code = 2;
    rr.message = std::string("invalid config: ") + e.what();
    rr.report["error"] = {{"message", e.what()}};
  } catch (const std::runtime_error& e) {
    // e.g. a walk outrunning the torus: the parameters cannot produce a valid result
    rr.exit_code = 2;
    rr.message = e.what();
    rr.report["error"] = {{"message", e.what()}};
  }
  return rr;
}

int run_and_write(const ExperimentConfig& cfg, std::ostream& out, std::ostream& err) {
  const auto rr = run(cfg);
  if (!rr.message.empty()) err << rr.message << '\n';
  const bool want_json = cfg.format != OutputFormat::csv;
  const bool want_csv = cfg.format != OutputFormat::json;
  if (cfg.out.empty()) {
    if (want_json) out << rr.report.dump(2) << '\n';
    if (want_csv) out << rr.csv;
    return rr.exit_code;
  }
  if (want_json) {
    std::ofstream f(cfg.out + ".json", std::ios::binary);
    if (!f) {
      err << "cannot write " << cfg.out << ".json\n";
      return 2;
    }
    f << rr.report.dump(2) << '\n';
  }
  if (want_csv && !rr.csv.empty()) {
    std::ofstream f(cfg.out + ".csv", std::ios::binary);
    if (!f) {
      err << "cannot write " << cfg.out << ".csv\n";
      return 2;
    }
    f << rr.csv;
  }
  return rr.exit_code;
}

}  // namespace pex
