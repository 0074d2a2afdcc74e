#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "pex/environment.hpp"
#include "pex/exclusion.hpp"
#include "pex/linalg.hpp"
#include "pex/test_function.hpp"

namespace pex {

/// Initial macroscopic density rho_bar on the unit torus, values in [0,1].
class MacroscopicProfile {
 public:
  enum class Kind { constant, sinusoid, custom };

  static MacroscopicProfile constant(std::size_t d, double rho);
  /// mean + amplitude * sin(2 pi u_axis).
  static MacroscopicProfile sinusoid(std::size_t d, double mean = 0.5,
                                     double amplitude = 0.5, std::size_t axis = 0);
  static MacroscopicProfile custom(std::size_t d,
                                   std::function<double(const double*)> fn,
                                   std::string label = "custom");
  /// "const:RHO" or "sin[:MEAN:AMP]".
  static MacroscopicProfile parse(std::string_view s, std::size_t d);

  Kind kind() const noexcept { return kind_; }
  std::size_t dim() const noexcept { return d_; }
  double mean_value() const noexcept { return mean_; }
  double amplitude() const noexcept { return amp_; }
  std::size_t axis() const noexcept { return axis_; }

  double operator()(const double* u) const;
  /// Throws std::invalid_argument if a value on a dense grid leaves [0,1].
  void validate(int grid = 1024) const;
  std::string label() const;
  nlohmann::json to_json() const;

 private:
  Kind kind_ = Kind::constant;
  std::size_t d_ = 1;
  double mean_ = 0.0;
  double amp_ = 0.0;
  std::size_t axis_ = 0;
  std::function<double(const double*)> fn_;
  std::string label_;
};

/// Lattice values of G at x/N, cached for repeated density-field evaluation.
struct FieldProbe {
  TestFunction g;
  std::vector<double> values;
  double scale = 1.0;  // N^{-d}

  FieldProbe(const Environment& env, TestFunction g, int n);
  double operator()(const ParticleConfig& cfg) const;
  /// c_max N^{-d} sum_x |G(x/N)|.
  double bound(int c_max) const;
};

/// X^N(G) = N^{-d} sum_x G(x/N) eta(x).
double density_field(const Environment& env, const ParticleConfig& cfg, int n,
                     const TestFunction& g);

/// rho_t = heat semigroup with covariance Sigma applied to rho_bar. Closed form
/// for constant and sinusoidal profiles; custom profiles in d = 1 use
/// Crank-Nicolson on `grid` cells with periodic linear interpolation.
std::function<double(const double*)> heat_solution(const Matrix& sigma,
                                                   const MacroscopicProfile& rho,
                                                   double t, int grid = 512);

/// pi_t(G) = mean_alpha * int G rho_t.
double limit_field(double mean_alpha, const Matrix& sigma,
                   const MacroscopicProfile& rho, const TestFunction& g, double t);

/// E[alpha_0] from the law when known, else the empirical mean.
double law_mean(const Environment& env);

struct ConsistencyReport {
  double probability = 0.0;
  double stderr_ = 0.0;
  std::uint64_t samples = 0;
  double limit = 0.0;       // pi^{rho_bar}(G)
  double mean_field = 0.0;  // average X^N_0(G)
  int n = 0;
  nlohmann::json to_json() const;
};

/// Monte Carlo nu_N(|X^N_0(G) - pi^{rho_bar}(G)| > delta) for the slowly
/// varying Binomial initial law.
ConsistencyReport consistency_check(const Environment& env,
                                    const MacroscopicProfile& rho, int n,
                                    const TestFunction& g, double delta,
                                    std::uint64_t samples, std::uint64_t seed);

struct VarianceBoundReport {
  int n = 0;
  double t = 0.0;
  std::uint64_t replicas = 0;
  double second_moment = 0.0;  // E[m^2], m = X_t(G) - X_0(S_{tN^2} G)
  double stderr_ = 0.0;
  double mean = 0.0;           // E[m], should vanish
  double mean_stderr = 0.0;
  double bound = 0.0;          // (1/2N^d) N^{-d} sum G(x/N)^2 alpha_x
  bool pass = false;
  nlohmann::json to_json() const;
};

VarianceBoundReport variance_bound_check(const Environment& env,
                                         const ParticleConfig& cfg0, int n,
                                         const TestFunction& g, double t,
                                         std::uint64_t replicas,
                                         std::uint64_t seed);

/// X^N_t(G) along one SEP path on a macroscopic time grid.
struct DensityFieldSeries {
  int n = 0;
  std::vector<double> times;
  std::vector<std::vector<double>> values;  // [t][G]
  std::uint64_t env_hash = 0;
  std::uint64_t seed = 0;
  std::uint64_t events = 0;
};

DensityFieldSeries record_density_series(const Environment& env,
                                         const ParticleConfig& cfg0, int n,
                                         const std::vector<FieldProbe>& probes,
                                         const std::vector<double>& t_grid,
                                         std::uint64_t seed);

class BudgetExceeded : public std::runtime_error {
 public:
  BudgetExceeded(const std::string& what, double projected, double cap)
      : std::runtime_error(what), projected_(projected), cap_(cap) {}
  double projected() const noexcept { return projected_; }
  double cap() const noexcept { return cap_; }

 private:
  double projected_;
  double cap_;
};

struct HdlConfig {
  EnvLaw law;
  std::size_t d = 1;
  std::vector<int> n_grid{32, 64, 128};
  MacroscopicProfile rho = MacroscopicProfile::sinusoid(1);
  std::vector<TestFunction> g_list;
  std::vector<double> t_grid{0.0, 0.01, 0.05, 0.1};
  Matrix sigma = Matrix(1, 2.0);
  std::string sigma_source = "given";
  std::uint64_t envs = 20;
  std::uint64_t replicas = 1;  // per environment
  std::uint64_t seed = 1;
  double event_cap = 5e10;
};

struct HdlEntry {
  int n = 0;
  double t = 0.0;
  std::size_t g = 0;
  double empirical = 0.0;  // mean X^N_t(G)
  double limit = 0.0;      // pi_t(G)
  double abs_err = 0.0;    // mean |X^N_t(G) - pi_t(G)|
  double stderr_ = 0.0;    // of abs_err
};

struct HdlReport {
  std::vector<HdlEntry> entries;
  std::vector<int> n_grid;
  std::vector<double> err;         // max over (t, G) of abs_err, per N
  std::vector<double> err_stderr;  // stderr at the arg-max
  double threshold = 0.0;          // 0.05 E[alpha] min_G int|G|
  double projected_events = 0.0;
  double mean_alpha = 0.0;
  bool monotone = false;   // err non-increasing up to 2 combined stderr
  bool within_threshold = false;
  bool pass = false;
  /// Long format rows (N, t, G_id, replica, value); replica counts over
  /// (environment, replica) pairs.
  struct Row {
    int n;
    double t;
    std::size_t g;
    std::uint64_t replica;
    double value;
  };
  std::vector<Row> rows;

  nlohmann::json to_json() const;
  void write_csv(std::ostream& os) const;
};

/// Mean total bond rate times the microscopic horizon, over all tasks.
double hdl_projected_events(const HdlConfig& cfg);

/// Throws BudgetExceeded when the projection is above cfg.event_cap.
HdlReport hdl_experiment(const HdlConfig& cfg);

}  // namespace pex
