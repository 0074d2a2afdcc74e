#include "pex/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pex {

Matrix Matrix::identity(std::size_t n, double scale) {
  Matrix m(n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = scale;
  return m;
}

Matrix Matrix::operator*(double s) const {
  Matrix m = *this;
  for (auto& v : m.a_) v *= s;
  return m;
}

Matrix Matrix::operator+(const Matrix& o) const {
  if (o.n_ != n_) throw std::invalid_argument("Matrix: dimension mismatch");
  Matrix m = *this;
  for (std::size_t k = 0; k < a_.size(); ++k) m.a_[k] += o.a_[k];
  return m;
}

double asymmetry(const Matrix& m) {
  double r = 0.0;
  for (std::size_t i = 0; i < m.dim(); ++i)
    for (std::size_t j = 0; j < i; ++j)
      r = std::max(r, std::fabs(m(i, j) - m(j, i)));
  return r;
}

Matrix symmetrize(const Matrix& m) {
  Matrix s(m.dim());
  for (std::size_t i = 0; i < m.dim(); ++i)
    for (std::size_t j = 0; j < m.dim(); ++j)
      s(i, j) = 0.5 * (m(i, j) + m(j, i));
  return s;
}

std::vector<double> symmetric_eigenvalues(const Matrix& m) {
  const std::size_t n = m.dim();
  Matrix a = symmetrize(m);
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (a(p, q) == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
      }
    }
  }
  std::vector<double> ev(n);
  for (std::size_t i = 0; i < n; ++i) ev[i] = a(i, i);
  std::sort(ev.begin(), ev.end());
  return ev;
}

Matrix cholesky(const Matrix& m) {
  const std::size_t n = m.dim();
  Matrix l(n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = m(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > 0.0)) throw std::domain_error("matrix is not positive-definite");
    l(j, j) = std::sqrt(d);
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = m(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / l(j, j);
    }
  }
  return l;
}

double determinant_spd(const Matrix& m) {
  const Matrix l = cholesky(m);
  double d = 1.0;
  for (std::size_t i = 0; i < m.dim(); ++i) d *= l(i, i) * l(i, i);
  return d;
}

Matrix inverse_spd(const Matrix& m) {
  const std::size_t n = m.dim();
  const Matrix l = cholesky(m);
  // invert L, then A^{-1} = L^{-T} L^{-1}
  Matrix li(n);
  for (std::size_t i = 0; i < n; ++i) {
    li(i, i) = 1.0 / l(i, i);
    for (std::size_t j = 0; j < i; ++j) {
      double s = 0.0;
      for (std::size_t k = j; k < i; ++k) s -= l(i, k) * li(k, j);
      li(i, j) = s / l(i, i);
    }
  }
  Matrix inv(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = std::max(i, j); k < n; ++k) s += li(k, i) * li(k, j);
      inv(i, j) = s;
    }
  return inv;
}

double quadratic_form(const Matrix& a, const double* x) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i)
    for (std::size_t j = 0; j < a.dim(); ++j) s += x[i] * a(i, j) * x[j];
  return s;
}

}  // namespace pex
