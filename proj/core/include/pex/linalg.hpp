#pragma once

#include <cstddef>
#include <vector>

namespace pex {

/// Small dense square matrix (row-major), sized for diffusion matrices.
class Matrix {
 public:
  Matrix() = default;
  explicit Matrix(std::size_t n, double fill = 0.0) : n_(n), a_(n * n, fill) {}
  static Matrix identity(std::size_t n, double scale = 1.0);

  std::size_t dim() const noexcept { return n_; }
  double& operator()(std::size_t i, std::size_t j) { return a_[i * n_ + j]; }
  double operator()(std::size_t i, std::size_t j) const {
    return a_[i * n_ + j];
  }
  const std::vector<double>& data() const noexcept { return a_; }

  Matrix operator*(double s) const;
  Matrix operator+(const Matrix& o) const;

 private:
  std::size_t n_ = 0;
  std::vector<double> a_;
};

/// Max |A_ij - A_ji|.
double asymmetry(const Matrix& m);

/// Symmetric part (A + A^T)/2.
Matrix symmetrize(const Matrix& m);

/// Eigenvalues of a symmetric matrix by cyclic Jacobi, ascending.
std::vector<double> symmetric_eigenvalues(const Matrix& m);

/// Lower Cholesky factor; throws std::domain_error if not positive-definite.
Matrix cholesky(const Matrix& m);

double determinant_spd(const Matrix& m);
Matrix inverse_spd(const Matrix& m);

/// x^T A x.
double quadratic_form(const Matrix& a, const double* x);

}  // namespace pex
