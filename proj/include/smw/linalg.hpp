#pragma once

// Dense real kernels: SVD, spectral norm, extreme singular values, condition
// number, Moore-Penrose pseudoinverse, orthonormal bases and inversion.
//
// Singular values always come from LAPACK's divide-and-conquer SVD (dgesdd);
// the two-norm is never estimated by power iteration.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>
#include <lapacke.h>

#include "smw/random.hpp"

namespace smw {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

class InvalidInputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConvergenceError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Raised when a matrix is singular within the rank tolerance.
class SingularMatrixError : public NumericalError {
 public:
  SingularMatrixError(std::string what, double sigma_min, double tolerance)
      : NumericalError(std::move(what) + " (sigma_min=" + format(sigma_min) +
                       ", tolerance=" + format(tolerance) + ")"),
        sigma_min_(sigma_min),
        tolerance_(tolerance) {}

  double sigma_min() const noexcept { return sigma_min_; }
  double tolerance() const noexcept { return tolerance_; }

 private:
  static std::string format(double x) {
    std::ostringstream os;
    os.precision(6);
    os << x;
    return os.str();
  }

  double sigma_min_;
  double tolerance_;
};

/// Thin SVD m = left * diag(singulars) * right^T, singulars descending.
struct SvdFactors {
  Matrix left;
  Vector singulars;
  Matrix right;
};

inline constexpr double machine_epsilon = 0x1.0p-52;

inline void require_finite(const Matrix& m, const char* what) {
  if (m.rows() < 1 || m.cols() < 1)
    throw DimensionError(std::string(what) + ": empty matrix");
  if (!m.allFinite())
    throw InvalidInputError(std::string(what) + ": non-finite entry");
}

inline void require_square(const Matrix& m, const char* what) {
  if (m.rows() != m.cols())
    throw DimensionError(std::string(what) + ": matrix is " +
                         std::to_string(m.rows()) + "x" +
                         std::to_string(m.cols()) + ", expected square");
}

/// sigma_max * max(rows, cols) * 2^-52.
inline double rank_tolerance(const Vector& singulars, Index rows, Index cols) {
  if (singulars.size() == 0) return 0.0;
  return singulars(0) * static_cast<double>(std::max(rows, cols)) *
         machine_epsilon;
}

namespace detail {

inline void check_gesdd(lapack_int info, const char* what) {
  if (info > 0)
    throw ConvergenceError(std::string(what) +
                           ": dgesdd failed to converge (info=" +
                           std::to_string(info) + ")");
  if (info < 0)
    throw NumericalError(std::string(what) + ": dgesdd rejected argument " +
                         std::to_string(-info));
}

}  // namespace detail

/// Singular values only, descending.
inline Vector singular_values(const Matrix& m) {
  require_finite(m, "singular_values");
  Matrix work = m;
  const auto rows = static_cast<lapack_int>(m.rows());
  const auto cols = static_cast<lapack_int>(m.cols());
  Vector s(std::min(m.rows(), m.cols()));
  double dummy = 0.0;
  const lapack_int info =
      LAPACKE_dgesdd(LAPACK_COL_MAJOR, 'N', rows, cols, work.data(), rows,
                     s.data(), &dummy, 1, &dummy, 1);
  detail::check_gesdd(info, "singular_values");
  return s;
}

inline SvdFactors svd(const Matrix& m) {
  require_finite(m, "svd");
  Matrix work = m;
  const auto rows = static_cast<lapack_int>(m.rows());
  const auto cols = static_cast<lapack_int>(m.cols());
  const Index r = std::min(m.rows(), m.cols());
  SvdFactors f{Matrix(m.rows(), r), Vector(r), Matrix(r, m.cols())};
  const lapack_int info = LAPACKE_dgesdd(
      LAPACK_COL_MAJOR, 'S', rows, cols, work.data(), rows, f.singulars.data(),
      f.left.data(), rows, f.right.data(), static_cast<lapack_int>(r));
  detail::check_gesdd(info, "svd");
  // dgesdd returns V^T.
  f.right.transposeInPlace();
  return f;
}

inline double two_norm(const Matrix& m) { return singular_values(m)(0); }

inline double sigma_min(const Matrix& m) {
  const Vector s = singular_values(m);
  return s(s.size() - 1);
}

inline Matrix pseudo_inverse(const Matrix& m) {
  const SvdFactors f = svd(m);
  const double tol = rank_tolerance(f.singulars, m.rows(), m.cols());
  Vector inv_s = Vector::Zero(f.singulars.size());
  for (Index i = 0; i < f.singulars.size(); ++i)
    if (f.singulars(i) > tol) inv_s(i) = 1.0 / f.singulars(i);
  return f.right * inv_s.asDiagonal() * f.left.transpose();
}

/// sigma_max over the smallest singular value above the rank tolerance.
inline double condition_number(const Matrix& m) {
  const Vector s = singular_values(m);
  const double tol = rank_tolerance(s, m.rows(), m.cols());
  if (!(s(0) > 0.0))
    throw NumericalError("condition_number: matrix is identically zero");
  Index last = 0;
  for (Index i = 0; i < s.size(); ++i)
    if (s(i) > tol) last = i;
  return s(0) / s(last);
}

/// n x n orthogonal matrix: Householder QR of a seeded Gaussian, with column
/// signs fixed so that R has a positive diagonal.
inline Matrix orthonormal_from_gaussian(Index n, std::uint64_t seed) {
  if (n < 1) throw DimensionError("orthonormal_from_gaussian: n must be >= 1");
  const Matrix g = gaussian_matrix(n, n, seed);
  const Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ();
  const auto diag = qr.matrixQR().diagonal();
  for (Index j = 0; j < n; ++j)
    if (diag(j) < 0.0) q.col(j) = -q.col(j);
  return q;
}

/// Inverse via partially pivoted LU.
///
/// Singularity is decided against the rank tolerance on the true smallest
/// singular value. The LU reciprocal condition estimate screens out clearly
/// nonsingular inputs so the SVD only runs near the boundary.
inline Matrix invert(const Matrix& m) {
  require_finite(m, "invert");
  require_square(m, "invert");
  const Index n = m.rows();
  const Eigen::PartialPivLU<Matrix> lu(m);
  const double screen =
      1e3 * static_cast<double>(n) * static_cast<double>(n) * machine_epsilon;
  const double rcond = lu.rcond();
  if (!(rcond > screen)) {
    const Vector s = singular_values(m);
    const double tol = rank_tolerance(s, n, n);
    if (!(s(n - 1) > tol))
      throw SingularMatrixError("invert: matrix is singular within tolerance",
                                s(n - 1), tol);
  }
  Matrix inv = lu.inverse();
  if (!inv.allFinite()) {
    const Vector s = singular_values(m);
    throw SingularMatrixError("invert: LU produced non-finite inverse",
                              s(n - 1), rank_tolerance(s, n, n));
  }
  return inv;
}

inline Matrix identity(Index n) { return Matrix::Identity(n, n); }

/// Geometric sequence from 10^first to 10^last with `count` points, endpoints
/// inclusive (numpy.logspace semantics).
inline Vector logspace(double first, double last, Index count) {
  Vector v(count);
  if (count == 1) {
    v(0) = std::pow(10.0, first);
    return v;
  }
  for (Index i = 0; i < count; ++i) {
    const double t = first + (last - first) * static_cast<double>(i) /
                                 static_cast<double>(count - 1);
    v(i) = std::pow(10.0, t);
  }
  return v;
}

}  // namespace smw
