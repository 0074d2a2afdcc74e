#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pex/environment.hpp"
#include "pex/linalg.hpp"
#include "pex/test_function.hpp"

namespace pex {

enum class SigmaMethod { msd_alpha_walk, msd_omega_walk_timechange, corrector_1d };

std::string to_string(SigmaMethod m);
SigmaMethod sigma_method_from_string(const std::string& s);

struct SigmaEstimate {
  Matrix sigma;
  Matrix stderr_;
  SigmaMethod method = SigmaMethod::msd_alpha_walk;
  std::uint64_t replicas = 0;
  double horizon = 0.0;
  std::uint64_t env_hash = 0;
  /// Extra diagnostics (regression R^2, time-change cross-check, ...).
  nlohmann::json extra = nlohmann::json::object();

  /// Symmetric within stderr and positive-definite.
  bool valid() const;
  nlohmann::json to_json() const;
};

struct MsdOptions {
  int time_points = 16;
  int batches = 32;
  /// Start replicas from the reversible law (sites weighted by alpha);
  /// otherwise every replica starts at site 0.
  bool weighted_start = true;
};

/// Sigma_ij = slope of Cov(X_t^i, X_t^j) against t over [T/2, T], stderr from
/// batch means. For the omega kind the omega walk is simulated, time changed
/// and sampled at the same process times; its untransformed MSD slope gives
/// Lambda, and Lambda / mean(alpha) is reported for comparison.
SigmaEstimate estimate_sigma_msd(const Environment& env, SigmaMethod kind,
                                 double horizon, std::uint64_t replicas,
                                 std::uint64_t seed, const MsdOptions& opt = {});

SigmaEstimate estimate_sigma_msd(const EnvLaw& law, const std::vector<int>& dims,
                                 SigmaMethod kind, double horizon,
                                 std::uint64_t replicas, std::uint64_t seed,
                                 const MsdOptions& opt = {});

/// 1-d finite-volume value from the environment itself:
/// 2 / (mean(1/omega) * mean(alpha)) over the ring.
SigmaEstimate corrector_1d(const Environment& env);

/// 2 / (E[1/alpha]^2 E[alpha]) for an i.i.d. (or constant) law in d = 1.
double sigma_oracle_1d(const EnvLaw& law, std::size_t d = 1);

struct ConvergenceReport {
  std::vector<int> n_grid;
  std::vector<double> times;                 // macroscopic
  std::vector<double> sup_metric;            // per N, max over times
  std::vector<double> l1_metric;             // per N, max over times
  std::vector<std::vector<double>> sup_by_t; // per N, per time
  std::vector<std::vector<double>> l1_by_t;

  nlohmann::json to_json() const;
};

/// Compares S_{tN^2} G(x/N) (uniformized action on the sampled vector) with
/// the periodized Gaussian convolution S^Sigma_t G(x/N). Each environment
/// has side N in every direction; times are t_grid together with T.
ConvergenceReport semigroup_convergence(const std::vector<Environment>& envs,
                                        const TestFunction& g, const Matrix& sigma,
                                        double T, const std::vector<double>& t_grid,
                                        double tol = 1e-10);

struct LocalCltReport {
  std::vector<int> n_grid;
  std::vector<double> metric;  // per N
  std::vector<double> worst_t, worst_u;
  bool weighted = false;
  nlohmann::json to_json() const;
};

/// max over |y/N| <= ell and t in t_grid of |N^d p_{tN^2}(0,y) - k_t(y/N)|,
/// k_t the periodized Gaussian density with covariance t Sigma. With
/// `weighted` the reference is (alpha_y / mean(alpha)) k_t(y/N).
LocalCltReport local_clt_check(const std::vector<Environment>& envs,
                               const Matrix& sigma, const std::vector<double>& t_grid,
                               double ell, bool weighted = false,
                               double tol = 1e-10);

/// Spatial profile of the same discrepancy at one N and t, indexed by site.
std::vector<double> local_clt_profile(const Environment& env, const Matrix& sigma,
                                      double t, bool weighted = false,
                                      double tol = 1e-10);

struct HolderReport {
  double c_hat = 0.0;        // max-ratio constant (no violations by construction)
  double gamma_hat = 0.0;    // log-log slope
  double c_fit = 0.0;        // regression intercept constant
  double violation_fraction_fit = 0.0;
  double violation_fraction = 0.0;
  double r2 = 0.0;
  std::uint64_t pairs = 0;
  bool degenerate = false;
  nlohmann::json to_json() const;
};

/// Fits |S_{tN^2}G(x/N) - S_{sN^2}G(y/N)| <= C |G|_inf r^gamma,
/// r = (sqrt|t-s| v |x/N-y/N|) / sqrt(t ^ s), over pairs with 0 < r <= 1
/// drawn from `time_points` times in [t_lo, t_hi] and every `stride`-th site.
HolderReport holder_modulus_estimate(const Environment& env, const TestFunction& g,
                                     int n, double t_lo, double t_hi,
                                     int time_points = 8, int stride = 1,
                                     double tol = 1e-10);

}  // namespace pex
