#pragma once

// Small dense complex matrices: determinants and cofactors for N of a few.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <utility>
#include <vector>

#include "qbochner/error.hpp"

namespace qbochner::linalg {

class ComplexMatrix {
 public:
  ComplexMatrix() = default;
  explicit ComplexMatrix(std::size_t n) : n_(n), a_(n * n) {}

  ComplexMatrix(std::initializer_list<std::initializer_list<Complex>> rows)
      : n_(rows.size()), a_(n_ * n_) {
    std::size_t i = 0;
    for (const auto& row : rows) {
      if (row.size() != n_) throw std::invalid_argument("ComplexMatrix: ragged rows");
      std::size_t j = 0;
      for (const auto& v : row) (*this)(i, j++) = v;
      ++i;
    }
  }

  static ComplexMatrix identity(std::size_t n) {
    ComplexMatrix m(n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t size() const { return n_; }

  Complex& operator()(std::size_t i, std::size_t j) { return a_[i * n_ + j]; }
  const Complex& operator()(std::size_t i, std::size_t j) const { return a_[i * n_ + j]; }

  double max_norm() const {
    double m = 0.0;
    for (const auto& v : a_) m = std::max(m, std::abs(v));
    return m;
  }

  /// max |a_ij - conj(a_ji)|
  double hermiticity_defect() const {
    double d = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t j = i; j < n_; ++j) {
        d = std::max(d, std::abs((*this)(i, j) - std::conj((*this)(j, i))));
      }
    }
    return d;
  }

  /// Matrix with row i and column j removed.
  ComplexMatrix minor_matrix(std::size_t row, std::size_t col) const {
    ComplexMatrix m(n_ - 1);
    for (std::size_t i = 0, mi = 0; i < n_; ++i) {
      if (i == row) continue;
      for (std::size_t j = 0, mj = 0; j < n_; ++j) {
        if (j == col) continue;
        m(mi, mj++) = (*this)(i, j);
      }
      ++mi;
    }
    return m;
  }

  friend bool operator==(const ComplexMatrix&, const ComplexMatrix&) = default;

 private:
  std::size_t n_ = 0;
  std::vector<Complex> a_;
};

/// Determinant by LU factorization with partial pivoting.
inline Complex determinant(ComplexMatrix a) {
  const std::size_t n = a.size();
  if (n == 0) return 1.0;
  Complex det = 1.0;
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t pivot = k;
    double best = std::abs(a(k, k));
    for (std::size_t i = k + 1; i < n; ++i) {
      const double v = std::abs(a(i, k));
      if (v > best) {
        best = v;
        pivot = i;
      }
    }
    if (best == 0.0) return 0.0;
    if (pivot != k) {
      for (std::size_t j = 0; j < n; ++j) std::swap(a(k, j), a(pivot, j));
      det = -det;
    }
    const Complex p = a(k, k);
    det *= p;
    for (std::size_t i = k + 1; i < n; ++i) {
      const Complex f = a(i, k) / p;
      if (f == Complex{}) continue;
      for (std::size_t j = k + 1; j < n; ++j) a(i, j) -= f * a(k, j);
    }
  }
  return det;
}

/// Cofactor matrix C with C(i, j) = (-1)^{i+j} det(minor(i, j)) = d det / d a_ij.
inline ComplexMatrix cofactors(const ComplexMatrix& a) {
  const std::size_t n = a.size();
  ComplexMatrix c(n);
  if (n == 1) {
    c(0, 0) = 1.0;
    return c;
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double sign = ((i + j) % 2 == 0) ? 1.0 : -1.0;
      c(i, j) = sign * determinant(a.minor_matrix(i, j));
    }
  }
  return c;
}

}  // namespace qbochner::linalg
