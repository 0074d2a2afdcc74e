#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "pex/linalg.hpp"

namespace pex {

enum class BumpKind { gaussian_bump, cosine_bump, polynomial_bump, constant };

std::string to_string(BumpKind k);
BumpKind bump_kind_from_string(std::string_view s);

/// Compactly supported bump on the unit torus [0,1)^d.
///
///   gaussian_bump    A exp(-r^2 / 2w^2) for r < R (R defaults to 8w)
///   cosine_bump      A (1 + cos(pi r / w)) / 2 for r < w
///   polynomial_bump  A (1 - r^2/w^2)^3 for r < w
///   constant         A everywhere (used for mass checks)
///
/// r is the minimal-image distance to the center, so the support radius must
/// stay below 1/2.
class TestFunction {
 public:
  TestFunction(BumpKind kind, std::vector<double> center, double width,
               double amplitude = 1.0, double radius = 0.0);
  static TestFunction constant(std::size_t d, double amplitude = 1.0);

  BumpKind kind() const noexcept { return kind_; }
  std::size_t dim() const noexcept { return center_.size(); }
  const std::vector<double>& center() const noexcept { return center_; }
  double width() const noexcept { return width_; }
  double amplitude() const noexcept { return amp_; }
  /// Support radius (infinite-like 1 for the constant kind).
  double radius() const noexcept { return radius_; }

  double operator()(const double* u) const;
  double operator()(double u) const { return (*this)(&u); }
  /// Value when the function lives on a torus with the given side lengths
  /// (the support is placed at the same center, distances are minimal-image).
  double at(const double* u, const double* period) const;

  double integral() const;
  double abs_integral() const;
  double sup_norm() const;

  /// (S^Sigma_t G)(u): convolution with the periodized centered Gaussian of
  /// covariance t*Sigma. Closed form for gaussian and constant kinds,
  /// quadrature otherwise.
  double heat_evolved(const Matrix& sigma, double t, const double* u) const;

  /// Integral of G(u) f(u) over the unit torus by composite Gauss-Legendre
  /// quadrature on the support of G.
  double integrate_against(const std::function<double(const double*)>& f,
                           int panels_per_width = 8) const;

  nlohmann::json to_json() const;
  static TestFunction from_json(const nlohmann::json& j);
  /// "kind:c1[,c2...]:width[:amplitude]" or "constant[:amplitude]".
  static TestFunction parse(std::string_view text, std::size_t d);
  std::string label() const;

 private:
  double radial(double r2) const;

  BumpKind kind_;
  std::vector<double> center_;
  double width_;
  double amp_;
  double radius_;
};

/// Wrap to the minimal image in [-1/2, 1/2).
double torus_delta(double a, double b);

/// Density at displacement u of the periodized centered Gaussian with
/// covariance c on the unit torus; images are summed shell by shell until a
/// shell adds less than image_tol.
double periodized_gaussian(const Matrix& c, const double* u,
                           double image_tol = 1e-12);

}  // namespace pex
