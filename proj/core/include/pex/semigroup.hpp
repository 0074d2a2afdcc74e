#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "pex/environment.hpp"
#include "pex/random_walk.hpp"

namespace pex {

/// Generator of a nearest-neighbor walk with integer rates on directed bonds.
struct GeneratorMatrix {
  Torus torus;
  WalkKind kind = WalkKind::alpha_walk;
  std::vector<std::int64_t> rate;  // q(x, neighbor(x,k)) at x * degree + k
  std::vector<std::int64_t> exit;  // -q(x,x)

  Site size() const noexcept { return torus.size(); }
  std::int64_t q(Site x, int k) const noexcept {
    return rate[static_cast<std::size_t>(x) * torus.degree() + k];
  }
  std::int64_t max_exit_rate() const;
  /// max_x |sum_y q(x,y)| in exact integer arithmetic (always 0 when built
  /// by make_generator).
  std::int64_t row_sum_residual() const;

  /// out = A f.
  void apply(const std::vector<double>& f, std::vector<double>& out) const;
  /// out = mu A (action on row vectors / measures).
  void apply_left(const std::vector<double>& mu, std::vector<double>& out) const;
};

GeneratorMatrix make_generator(const Environment& env, WalkKind kind);

enum class SemigroupMethod { uniformization, scaling_squaring };
std::string to_string(SemigroupMethod m);

constexpr double kDefaultTol = 1e-10;
constexpr Site kDenseCap = 4096;

/// Dense transition matrix p_t(x,y), row-major.
struct SemigroupTable {
  double t = 0.0;
  Site n = 0;
  std::vector<double> p;
  SemigroupMethod method = SemigroupMethod::uniformization;
  double tol = kDefaultTol;

  double operator()(Site x, Site y) const noexcept {
    return p[static_cast<std::size_t>(x * n + y)];
  }
  /// max_x |sum_y p(x,y) - 1|.
  double row_sum_residual() const;
  /// max_{x,y} |alpha_x p(x,y) - alpha_y p(y,x)|.
  double reversibility_residual(const Environment& env) const;
  /// Header line "t,size,tol" then one CSV row per x.
  void write_csv(std::ostream& os) const;
};

/// Poisson(m) probabilities for n = 0..K where the omitted tail is <= tol.
std::vector<double> poisson_weights(double m, double tol);

/// S_t f for each t in `times`, sharing the uniformized powers P^n f.
std::vector<std::vector<double>> semigroup_apply(const GeneratorMatrix& gen,
                                                 const std::vector<double>& f,
                                                 const std::vector<double>& times,
                                                 double tol = kDefaultTol);

/// mu S_t for each t in `times`.
std::vector<std::vector<double>> semigroup_apply_left(
    const GeneratorMatrix& gen, const std::vector<double>& mu,
    const std::vector<double>& times, double tol = kDefaultTol);

SemigroupTable semigroup(const GeneratorMatrix& gen, double t,
                         double tol = kDefaultTol,
                         SemigroupMethod method = SemigroupMethod::uniformization);

/// max_{x,y} |(p_s p_t)(x,y) - p_{s+t}(x,y)| for the alpha walk; O(n^3).
double chapman_kolmogorov_residual(const Environment& env, double s, double t,
                                   double tol = kDefaultTol);

/// p_t(x,y) / alpha_y.
double heat_kernel(const Environment& env, double t, Site x, Site y,
                   double tol = kDefaultTol);

struct BoundReport {
  double c = 0.0;  // smallest constant making the bound hold on the grid
  double t = 0.0;  // arg-max witness
  Site x = 0, y = 0;
  double p = 0.0;
};

/// Fits c in p_t(x,y) <= c (1 v t^{d/2})^{-1} exp(-|x-y| / (1 v sqrt t)),
/// with |x-y| the minimal-image Euclidean distance.
BoundReport heat_kernel_bound_check(const Environment& env,
                                    const std::vector<double>& t_grid,
                                    double tol = kDefaultTol);

/// (1/2) sum_x sum_{y~x} alpha_x alpha_y (f(y) - f(x))^2.
double dirichlet_form(const Environment& env, const std::vector<double>& f);

/// Dirichlet form over ||f||_{2,alpha}^{2+4/d} ||f||_{1,alpha}^{-4/d}.
double nash_ratio(const Environment& env, const std::vector<double>& f);

/// sum_x f(x) g(x) alpha_x.
double inner_alpha(const Environment& env, const std::vector<double>& f,
                   const std::vector<double>& g);

}  // namespace pex
