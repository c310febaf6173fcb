#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "mjw/errors.hpp"

namespace mjw {

// Minimal dense row-major matrix. Sized for the small systems used here
// (spline coefficient blocks, correlation matrices of modest panels).
class Matrix {
 public:
  Matrix() : rows_(0), cols_(0) {}
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), a_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t i, std::size_t j) { return a_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return a_[i * cols_ + j]; }

  const std::vector<double>& data() const { return a_; }
  std::vector<double>& data() { return a_; }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

 private:
  std::size_t rows_, cols_;
  std::vector<double> a_;
};

// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
// Returns the eigenvalues unsorted; tol is relative to the Frobenius norm.
inline std::vector<double> jacobi_eigenvalues(Matrix a, double tol = 1e-10,
                                              int max_sweeps = 100) {
  const std::size_t n = a.rows();
  require(n == a.cols(), errc::config_error, "jacobi: matrix must be square");
  if (n == 0) return {};
  if (n == 1) return {a(0, 0)};

  double fro2 = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) fro2 += a(i, j) * a(i, j);
  const double thresh2 = tol * tol * fro2;

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off2 = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) off2 += 2.0 * a(i, j) * a(i, j);
    if (off2 <= thresh2) {
      std::vector<double> eig(n);
      for (std::size_t i = 0; i < n; ++i) eig[i] = a(i, i);
      return eig;
    }
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        double apq = a(p, q);
        if (apq == 0.0) continue;
        double app = a(p, p), aqq = a(q, q);
        double theta = 0.5 * (aqq - app) / apq;
        double t = 1.0 / (std::fabs(theta) + std::sqrt(1.0 + theta * theta));
        if (theta < 0.0) t = -t;
        double c = 1.0 / std::sqrt(1.0 + t * t);
        double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
      }
    }
  }
  raise(errc::numerical_failure, "jacobi eigensolver did not converge");
}

// Cholesky factor L (lower) of a symmetric positive definite matrix, A = L L^T.
// Throws on non-positive pivots.
inline Matrix cholesky(const Matrix& a) {
  const std::size_t n = a.rows();
  require(n == a.cols(), errc::config_error, "cholesky: matrix must be square");
  Matrix l(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double sum = a(i, j);
      for (std::size_t k = 0; k < j; ++k) sum -= l(i, k) * l(j, k);
      if (i == j) {
        require(sum > 0.0, errc::numerical_failure, "cholesky: matrix not positive definite");
        l(i, i) = std::sqrt(sum);
      } else {
        l(i, j) = sum / l(j, j);
      }
    }
  }
  return l;
}

// Solve L y = b (forward substitution), L lower triangular.
inline std::vector<double> forward_solve(const Matrix& l, const std::vector<double>& b) {
  const std::size_t n = l.rows();
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    double sum = b[i];
    for (std::size_t k = 0; k < i; ++k) sum -= l(i, k) * y[k];
    y[i] = sum / l(i, i);
  }
  return y;
}

// Solve L^T x = y (back substitution), L lower triangular.
inline std::vector<double> backward_solve(const Matrix& l, const std::vector<double>& y) {
  const std::size_t n = l.rows();
  std::vector<double> x(n);
  for (std::size_t ii = n; ii-- > 0;) {
    double sum = y[ii];
    for (std::size_t k = ii + 1; k < n; ++k) sum -= l(k, ii) * x[k];
    x[ii] = sum / l(ii, ii);
  }
  return x;
}

// Solve (L L^T) x = b.
inline std::vector<double> cholesky_solve(const Matrix& l, const std::vector<double>& b) {
  return backward_solve(l, forward_solve(l, b));
}

// log det(L L^T) = 2 sum log L_ii
inline double cholesky_log_det(const Matrix& l) {
  double s = 0.0;
  for (std::size_t i = 0; i < l.rows(); ++i) s += std::log(l(i, i));
  return 2.0 * s;
}

}  // namespace mjw
