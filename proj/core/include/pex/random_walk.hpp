#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "pex/environment.hpp"
#include "pex/stats.hpp"
#include "pex/rng.hpp"

namespace pex {

/// alpha_walk: jump x -> y at rate alpha_y.
/// omega_walk: jump x -> y at rate omega_xy = alpha_x alpha_y.
enum class WalkKind { alpha_walk, omega_walk };

std::string to_string(WalkKind k);
WalkKind walk_kind_from_string(const std::string& s);

/// lambda_x = sum_{y~x} alpha_y (alpha walk) or alpha_x * that (omega walk).
std::int64_t holding_rate(const Environment& env, Site x,
                          WalkKind kind = WalkKind::alpha_walk);

/// Jump probabilities over the neighbor slots of x, alpha_z / lambda_x.
/// Identical for both walk kinds.
std::vector<double> jump_distribution(const Environment& env, Site x);

struct WalkEvent {
  double time;
  Site site;
  int slot;  // neighbor slot used for the jump into `site`
};

struct Trajectory {
  Site start = 0;
  std::vector<WalkEvent> events;
  double horizon = 0.0;

  Site position_at(double t) const;
  /// Checks the ordering and adjacency invariants; throws on violation.
  void validate(const Torus& torus) const;
  /// Unwrapped displacement at time t, per axis.
  std::vector<int> displacement_at(double t, std::size_t d) const;
};

/// Event-driven walker that can be advanced in stages without changing the
/// realized path: the pending jump time is kept across calls.
class Walker {
 public:
  Walker(const Environment& env, WalkKind kind, Site x0, std::uint64_t seed);

  /// Runs until time t. Returns number of jumps made.
  std::uint64_t advance_to(double t, std::vector<WalkEvent>* record = nullptr);

  Site site() const noexcept { return x_; }
  double time() const noexcept { return t_; }
  const std::vector<int>& displacement() const noexcept { return disp_; }
  std::uint64_t jumps() const noexcept { return jumps_; }

 private:
  void draw_next();

  const Environment* env_;
  WalkKind kind_;
  Site x_;
  double t_ = 0.0;
  double next_ = 0.0;
  std::vector<int> disp_;
  std::uint64_t jumps_ = 0;
  Rng rng_;
};

Trajectory simulate_walk(const Environment& env, WalkKind kind, Site x0,
                         double horizon, std::uint64_t seed);

/// Reparameterizes an omega-walk path by R(t) = int_0^t alpha_{X_s} ds.
Trajectory time_change(const Trajectory& traj, const Environment& env);

/// CSV rows (replica, event_index, time, site) with header.
void write_trajectories_csv(std::ostream& os,
                            const std::vector<Trajectory>& trajs);

struct TimeChangeReport {
  std::vector<double> times;
  std::vector<ChiSquareResult> tests;  // one per time
  std::uint64_t replicas = 0;
  double level = 0.01;
  double min_p = 1.0;
  bool pass = false;  // no test rejects at `level`

  nlohmann::json to_json() const;
};

/// Site histograms at each t of the time-changed omega walk against the
/// alpha walk, both started at x0, compared by a two-sample chi-square test.
TimeChangeReport time_change_equivalence(const Environment& env, Site x0,
                                         const std::vector<double>& t_grid,
                                         std::uint64_t replicas,
                                         std::uint64_t seed,
                                         double level = 0.01);

}  // namespace pex
