#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "pex/test_function.hpp"

namespace pex {

using Site = std::int64_t;

/// Periodic box Z^d / (L_1 Z x ... x L_d Z).
///
/// Sites are numbered row-major with the last coordinate fastest. Neighbor
/// slot k = 2i is x + e_i and k = 2i+1 is x - e_i. A side of length 2 makes
/// both slots point at the same site; the graph is then a multigraph and every
/// sum over neighbors counts that site twice.
class Torus {
 public:
  Torus() = default;
  explicit Torus(std::vector<int> dims);

  const std::vector<int>& dims() const noexcept { return dims_; }
  std::size_t dim() const noexcept { return dims_.size(); }
  int degree() const noexcept { return 2 * static_cast<int>(dims_.size()); }
  Site size() const noexcept { return size_; }

  Site neighbor(Site x, int k) const noexcept {
    return nbr_[static_cast<std::size_t>(x) * degree() + k];
  }
  /// Slot index of the reverse bond: neighbor(neighbor(x,k), reverse(k)) == x.
  static int reverse(int k) noexcept { return k ^ 1; }

  std::vector<int> coords(Site x) const;
  Site index(const std::vector<int>& c) const;  // coordinates taken mod L
  /// Slot k with neighbor(x,k) == y, or -1.
  int slot_of(Site x, Site y) const noexcept;
  bool adjacent(Site x, Site y) const noexcept { return slot_of(x, y) >= 0; }
  /// Graph (minimal-image l1) distance.
  int distance(Site x, Site y) const;
  /// Minimal-image Euclidean distance.
  double euclidean_distance(Site x, Site y) const;
  /// Unit displacement of slot k along its axis (+1 or -1).
  static int step(int k) noexcept { return (k & 1) ? -1 : 1; }
  static int axis(int k) noexcept { return k >> 1; }

 private:
  std::vector<int> dims_;
  std::vector<Site> strides_;
  Site size_ = 0;
  std::vector<Site> nbr_;
};

enum class LawKind { iid, markov_chain_1d_product, constant };

std::string to_string(LawKind k);

/// Distribution of the occupancy field.
struct EnvLaw {
  LawKind kind = LawKind::constant;
  std::vector<int> support{1};
  std::vector<double> weights{1.0};
  /// Row-stochastic, markov kind only.
  std::vector<std::vector<double>> transition;
  /// Ellipticity ceiling; 0 means max(support).
  int c_max = 0;

  static EnvLaw constant(int value);
  static EnvLaw iid(std::vector<int> support, std::vector<double> weights = {});
  /// Stationary chain along axis 0; weights default to the stationary vector.
  static EnvLaw markov(std::vector<int> support,
                       std::vector<std::vector<double>> transition,
                       std::vector<double> weights = {});
  /// "const:3", "iid:1,2", "iid:1,2@0.25,0.75", "markov:1,2|0.9,0.1;0.1,0.9".
  static EnvLaw parse(std::string_view s);

  int ceiling() const;
  /// Throws std::invalid_argument with a diagnostic.
  void validate() const;
  double mean() const;
  double mean_inverse() const;
  std::string describe() const;

  nlohmann::json to_json() const;
  static EnvLaw from_json(const nlohmann::json& j);
};

/// Stationary vector of a row-stochastic matrix.
std::vector<double> stationary_vector(
    const std::vector<std::vector<double>>& p);

/// Quenched maximal-occupancy field alpha on a torus.
struct Environment {
  Torus torus;
  std::vector<int> alpha;
  int c_max = 1;
  std::optional<EnvLaw> law;
  std::uint64_t seed = 0;

  Environment() = default;
  Environment(std::vector<int> dims, std::vector<int> alpha, int c_max = 0);

  Site size() const noexcept { return torus.size(); }
  std::size_t dim() const noexcept { return torus.dim(); }
  const std::vector<int>& dims() const noexcept { return torus.dims(); }
  int operator[](Site x) const noexcept {
    return alpha[static_cast<std::size_t>(x)];
  }

  /// Throws if some alpha is outside [1, c_max].
  void check_ellipticity() const;
  /// FNV-1a over dims and alpha.
  std::uint64_t hash() const;
  double empirical_mean() const;

  nlohmann::json to_json() const;
  static Environment from_json(const nlohmann::json& j);

  bool operator==(const Environment& o) const {
    return dims() == o.dims() && alpha == o.alpha && c_max == o.c_max;
  }
};

Environment sample_environment(const EnvLaw& law, const std::vector<int>& dims,
                               std::uint64_t seed);

/// omega on directed bonds, indexed x * degree + k.
struct ConductanceField {
  Torus torus;
  std::vector<std::int64_t> omega;

  std::int64_t operator()(Site x, int k) const noexcept {
    return omega[static_cast<std::size_t>(x) * torus.degree() + k];
  }
  /// Undirected bonds (x, x+e_i) listed x-major, axis-minor.
  std::vector<std::pair<Site, Site>> bonds() const;
  /// omega over bonds() in the same order.
  std::vector<std::int64_t> bond_values() const;
};

ConductanceField conductances(const Environment& env);

/// Values F(x/N) at every site, the function living on the torus of
/// macroscopic side L_i / N.
std::vector<double> lattice_values(const Torus& torus, const TestFunction& f,
                                   double n);

/// (1/N^d) sum_x F(x/N) alpha_x. Rejects functions whose rescaled support
/// does not fit inside the torus.
double ergodic_average(const Environment& env, const TestFunction& f, int n);

Environment translate(const Environment& env, const std::vector<int>& shift);

}  // namespace pex
