#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pex/environment.hpp"
#include "pex/rng.hpp"

namespace pex {

/// Occupation numbers eta(x) in [0, alpha_x].
using ParticleConfig = std::vector<int>;

void check_config(const Environment& env, const ParticleConfig& cfg);
std::int64_t particle_count(const ParticleConfig& cfg);
std::uint64_t config_hash(const ParticleConfig& cfg);

/// eta^{x,y}: one particle from x to y when x is occupied and y has room.
/// Throws if x and y are not neighbors.
ParticleConfig apply_move(const Environment& env, const ParticleConfig& cfg,
                          Site x, Site y);

/// Rate of the directed move x -> y: eta(x) (alpha_y - eta(y)).
inline std::int64_t move_rate(const Environment& env, const ParticleConfig& c,
                              Site x, Site y) {
  return static_cast<std::int64_t>(c[x]) * (env[y] - c[y]);
}

/// 0/1 occupations of ladder sites (x,i), 0 <= i < alpha_x, stored flat with
/// offset(x) = alpha_0 + ... + alpha_{x-1}.
struct LadderConfig {
  std::vector<std::int64_t> offset;  // size n+1
  std::vector<std::uint8_t> bits;

  /// Fills each ladder from the bottom.
  static LadderConfig lift(const Environment& env, const ParticleConfig& cfg);
  ParticleConfig project() const;
  std::uint8_t at(Site x, int i) const { return bits[offset[x] + i]; }
};

struct SepEvent {
  double time;
  Site from;
  Site to;
};

struct SepTrajectory {
  ParticleConfig initial;
  std::vector<SepEvent> events;
  double horizon = 0.0;

  ParticleConfig config_at(const Environment& env, double t) const;
  /// Replays every event and checks occupancy bounds; throws on violation.
  void validate(const Environment& env) const;
};

void write_sep_csv(std::ostream& os, const std::vector<SepTrajectory>& trajs);

/// Complete binary tree of non-negative integer weights with O(log n)
/// update and exact proportional selection.
class SumTree {
 public:
  explicit SumTree(std::size_t n = 0);
  void set(std::size_t i, std::int64_t v);
  std::int64_t get(std::size_t i) const { return tree_[base_ + i]; }
  std::int64_t total() const { return tree_[1]; }
  /// Leaf index i with prefix(i) <= u < prefix(i+1), for 0 <= u < total().
  std::size_t find(std::int64_t u) const;

 private:
  std::size_t base_ = 1;
  std::vector<std::int64_t> tree_;
};

/// Rejection-free kinetic Monte Carlo over directed bonds with rate
/// eta(x)(alpha_y - eta(y)). Only the 4d bonds touching the two updated sites
/// are refreshed after a move.
class DirectSep {
 public:
  DirectSep(const Environment& env, ParticleConfig cfg0, std::uint64_t seed);

  /// Runs until time t, calling on_event(time, from, to) after every move
  /// (the configuration is already updated when the callback runs).
  template <class F>
  std::uint64_t advance_to(double t, F&& on_event);
  std::uint64_t advance_to(double t) {
    return advance_to(t, [](double, Site, Site) {});
  }

  const ParticleConfig& config() const noexcept { return eta_; }
  double time() const noexcept { return t_; }
  std::int64_t total_rate() const noexcept { return tree_.total(); }

 private:
  void refresh(Site x);
  void draw_next();
  std::pair<Site, Site> select();
  void move(Site x, Site y);

  const Environment* env_;
  ParticleConfig eta_;
  SumTree tree_;
  Rng rng_;
  double t_ = 0.0;
  double next_ = 0.0;
};

/// Ladder stirring: every unordered ladder bond {(x,i),(y,j)}, |x-y| = 1,
/// carries a rate-one clock; at a ring the two ladder occupations swap.
/// Realized as one global clock of rate sum_{x~y} alpha_x alpha_y.
class LadderSep {
 public:
  LadderSep(const Environment& env, LadderConfig ladder0, std::uint64_t seed);

  template <class F>
  std::uint64_t advance_to(double t, F&& on_event);
  std::uint64_t advance_to(double t) {
    return advance_to(t, [](double, Site, Site) {});
  }

  const LadderConfig& ladder() const noexcept { return lad_; }
  ParticleConfig config() const { return lad_.project(); }
  double time() const noexcept { return t_; }
  std::uint64_t rings() const noexcept { return rings_; }

 private:
  const Environment* env_;
  LadderConfig lad_;
  std::vector<std::pair<Site, Site>> bonds_;
  std::vector<std::int64_t> cum_;  // cumulative omega over bonds_
  Rng rng_;
  double t_ = 0.0;
  double next_ = 0.0;
  std::uint64_t rings_ = 0;
};

SepTrajectory simulate_sep_direct(const Environment& env,
                                  const ParticleConfig& cfg0, double horizon,
                                  std::uint64_t seed);
SepTrajectory simulate_sep_ladder(const Environment& env,
                                  const LadderConfig& ladder0, double horizon,
                                  std::uint64_t seed);

// ------------------------------------------------------------ duality

struct DualityReport {
  double max_abs_residual = 0.0;
  std::uint64_t cases = 0;
  std::uint64_t worst_env_hash = 0;
  std::uint64_t worst_config_hash = 0;
  std::int64_t worst_site = -1;          // single-particle case
  std::uint64_t worst_dual_hash = 0;     // multi-particle case
  double lhs = 0.0, rhs = 0.0;           // at the worst case

  void merge(const DualityReport& o);
  nlohmann::json to_json() const;
};

/// A D(., eta)(x) against L D(x, .)(eta) with D(x, eta) = eta(x)/alpha_x.
DualityReport duality_check(const Environment& env, const ParticleConfig& cfg,
                            Site x);

/// D(xi, eta) = prod_x eta!/(eta-xi)! (alpha-xi)!/alpha! 1{xi <= eta}.
double duality_function(const Environment& env, const ParticleConfig& xi,
                        const ParticleConfig& eta);

/// L D(., eta)(xi) against L D(xi, .)(eta); at most 4 dual particles.
DualityReport multi_duality_check(const Environment& env,
                                  const ParticleConfig& xi,
                                  const ParticleConfig& eta);

// ------------------------------------------------------------ measures

/// Independent Binomial(alpha_x, p) occupations.
ParticleConfig binomial_measure_sampler(const Environment& env, double p,
                                        std::uint64_t seed);
/// Independent Binomial(alpha_x, rho(x/N)) occupations; rho is evaluated on
/// the macroscopic torus of side L_i/N.
ParticleConfig binomial_measure_sampler(
    const Environment& env, const std::function<double(const double*)>& rho,
    double n, std::uint64_t seed);

/// log nu_p restricted to the given sites.
double log_binomial_mass(const Environment& env, const ParticleConfig& cfg,
                         double p, const std::vector<Site>& sites);

// ------------------------------------------------------------ checks

struct CheckReport {
  std::string name;
  std::uint64_t cases = 0;
  double max_residual = 0.0;
  double threshold = 0.0;
  bool pass = false;
  nlohmann::json details = nlohmann::json::object();

  nlohmann::json to_json() const;
};

CheckReport reversibility_check(const Environment& env, double p,
                                std::uint64_t samples, std::uint64_t seed,
                                double threshold = 1e-10);

/// Monte Carlo E[eta_t(x)/alpha_x] against S_t(eta_0/alpha)(x).
/// max_residual is the largest |standardized deviation|.
CheckReport mean_density_evolution_check(const Environment& env,
                                         const ParticleConfig& cfg0,
                                         const std::vector<double>& t_grid,
                                         std::uint64_t replicas,
                                         std::uint64_t seed,
                                         double threshold = 4.0);

struct CovariationResult {
  Site x = 0, y = 0;
  bool adjacent = false;
  double mean_product = 0.0;   // average of M_t(x) M_t(y)
  double mean_bracket = 0.0;   // average predictable covariation
  double z = 0.0;              // standardized mean of M_x M_y - <M_x,M_y>
  double mean_bracket_alt = 0.0;
  double z_alt = 0.0;          // same with the alternative closed form
  double z_mean_x = 0.0;       // standardized mean of M_t(x)
  double z_mean_y = 0.0;
};

/// Site-level martingales M_t(x) = eta_t(x)/alpha_x - eta_0(x)/alpha_x
/// - int_0^t A(eta_s/alpha)(x) ds reconstructed along direct-SEP paths, with
/// their predictable covariations
///   x~y:  -(eta_x(alpha_y-eta_y) + eta_y(alpha_x-eta_x)) / (alpha_x alpha_y)
///   x=y:  sum over neighbors w of (eta_x(alpha_w-eta_w) + eta_w(alpha_x-eta_x)) / alpha_x^2
/// integrated exactly between events. The alternative form
///   x~y:  -alpha_x alpha_y (eta_x/alpha_x - eta_y/alpha_y)^2
/// (diagonal by summing the negated off-diagonal terms) is reported alongside.
struct CovariationReport {
  CheckReport summary;
  std::vector<CovariationResult> pairs;
};

CovariationReport martingale_covariation_check(
    const Environment& env, const ParticleConfig& cfg0,
    const std::vector<std::pair<Site, Site>>& pairs, double t,
    std::uint64_t replicas, std::uint64_t seed, double threshold = 4.0);

/// Ladder against direct simulation: per-site two-sample z-scores of
/// E[eta_t(x)]. max_residual is the largest |z|.
CheckReport ladder_equivalence_check(const Environment& env,
                                     const ParticleConfig& cfg0, double t,
                                     std::uint64_t replicas, std::uint64_t seed,
                                     double threshold = 3.0);

// ------------------------------------------------------------ templates

template <class F>
std::uint64_t DirectSep::advance_to(double t, F&& on_event) {
  std::uint64_t n = 0;
  while (next_ <= t) {
    t_ = next_;
    const auto [x, y] = select();
    move(x, y);
    ++n;
    on_event(t_, x, y);
    draw_next();
  }
  t_ = t;
  return n;
}

template <class F>
std::uint64_t LadderSep::advance_to(double t, F&& on_event) {
  std::uint64_t n = 0;
  const std::int64_t total = cum_.empty() ? 0 : cum_.back();
  if (total == 0) {
    t_ = t;
    return 0;
  }
  while (next_ <= t) {
    t_ = next_;
    ++rings_;
    const std::int64_t u =
        static_cast<std::int64_t>(rng_.below(static_cast<std::uint64_t>(total)));
    const std::size_t b = static_cast<std::size_t>(
        std::upper_bound(cum_.begin(), cum_.end(), u) - cum_.begin());
    const auto [x, y] = bonds_[b];
    const int i = static_cast<int>(rng_.below(static_cast<std::uint64_t>((*env_)[x])));
    const int j = static_cast<int>(rng_.below(static_cast<std::uint64_t>((*env_)[y])));
    auto& bx = lad_.bits[lad_.offset[x] + i];
    auto& by = lad_.bits[lad_.offset[y] + j];
    if (bx != by) {
      std::swap(bx, by);
      ++n;
      if (by)
        on_event(t_, x, y);
      else
        on_event(t_, y, x);
    }
    next_ = t_ + rng_.exponential(static_cast<double>(total));
  }
  t_ = t;
  return n;
}

}  // namespace pex
