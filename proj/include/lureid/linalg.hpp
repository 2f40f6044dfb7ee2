#pragma once

// Dense linear-algebra primitives used by the identification code.
// Everything here is a pure function of its arguments.

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "lureid/errors.hpp"

namespace lureid {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

namespace linalg {

inline constexpr double kSymmetryTol = 1e-10;
inline constexpr double kPsdClamp = 1e-10;
inline constexpr Eigen::Index kSvdLimit = 512;

/// Square matrix that was checked for symmetry on construction.
/// The stored entries are exactly symmetrized, (M + M^T) / 2.
class SymMatrix {
 public:
  SymMatrix() = default;

  explicit SymMatrix(Matrix m) {
    if (m.rows() != m.cols() || m.rows() == 0) {
      throw InvalidInputError("SymMatrix: matrix must be square and nonempty, got " +
                              std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
    }
    if (!m.allFinite()) throw InvalidInputError("SymMatrix: non-finite entry");
    const double scale = std::max(m.cwiseAbs().maxCoeff(), 1.0e-300);
    const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
    if (asym > kSymmetryTol * scale) {
      throw InvalidInputError("SymMatrix: asymmetry " + std::to_string(asym) +
                              " exceeds tolerance");
    }
    m_ = 0.5 * (m + m.transpose());
  }

  Eigen::Index dim() const noexcept { return m_.rows(); }
  const Matrix& matrix() const noexcept { return m_; }
  double operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }

  /// M + shift * I, still symmetric.
  SymMatrix shifted(double shift) const {
    SymMatrix out;
    out.m_ = m_;
    out.m_.diagonal().array() += shift;
    return out;
  }

 private:
  Matrix m_;
};

struct EigenDecomposition {
  Vector values;   // descending
  Matrix vectors;  // columns, orthonormal
};

inline EigenDecomposition sym_eig(const SymMatrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(m.matrix());
  if (solver.info() != Eigen::Success) {
    throw NumericalError("sym_eig: eigen solver did not converge for dimension " +
                             std::to_string(m.dim()),
                         m.dim());
  }
  // Eigen returns ascending order.
  EigenDecomposition out;
  out.values = solver.eigenvalues().reverse();
  out.vectors = solver.eigenvectors().rowwise().reverse();
  return out;
}

/// Principal square root of a numerically PSD matrix. Eigenvalues below
/// kPsdClamp * lambda_max are zeroed; anything more negative than
/// -kPsdClamp * lambda_max is rejected.
inline SymMatrix psd_sqrt(const SymMatrix& m) {
  const EigenDecomposition eig = sym_eig(m);
  const double lambda_max = std::max(eig.values(0), 0.0);
  const double floor = kPsdClamp * lambda_max;
  const double lambda_min = eig.values(eig.values.size() - 1);
  if (lambda_min < -floor) {
    throw NotPsdError("psd_sqrt: eigenvalue " + std::to_string(lambda_min) +
                          " is below the PSD tolerance",
                      lambda_min);
  }
  Vector root(eig.values.size());
  for (Eigen::Index i = 0; i < root.size(); ++i) {
    root(i) = eig.values(i) < floor ? 0.0 : std::sqrt(eig.values(i));
  }
  return SymMatrix(eig.vectors * root.asDiagonal() * eig.vectors.transpose());
}

namespace detail {

// Largest singular value by power iteration on M^T M. Starts from the
// unit vector of the largest column, which is never in the null space.
inline double power_iteration_norm(const Matrix& m, double tol = 1e-10, int max_iter = 10000) {
  Eigen::Index j0 = 0;
  if (m.colwise().norm().maxCoeff(&j0) == 0.0) return 0.0;
  Vector v = Vector::Unit(m.cols(), j0);
  double sigma = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    const Vector w = m.transpose() * (m * v);
    const double nw = w.norm();
    v = w / nw;
    const double next = std::sqrt(nw);
    if (std::abs(next - sigma) <= tol * next) break;
    sigma = next;
  }
  return (m * v).norm();
}

}  // namespace detail

/// Largest singular value. Full SVD up to 512 in both dimensions,
/// power iteration above.
inline double spectral_norm(const Matrix& m) {
  if (!m.allFinite()) throw InvalidInputError("spectral_norm: non-finite entry");
  if (m.size() == 0) return 0.0;
  if (m.cols() == 1) return m.col(0).norm();
  if (m.rows() == 1) return m.row(0).norm();
  if (m.rows() <= kSvdLimit && m.cols() <= kSvdLimit) {
    Eigen::JacobiSVD<Matrix> svd(m);
    return svd.singularValues()(0);
  }
  return detail::power_iteration_norm(m);
}

/// Cholesky factor of an SPD matrix, reusable across right-hand sides.
class SpdFactor {
 public:
  explicit SpdFactor(const SymMatrix& m) : llt_(m.matrix()), dim_(m.dim()) {
    if (llt_.info() != Eigen::Success) {
      throw NumericalError("spd_solve: Cholesky factorization failed (matrix not positive "
                           "definite), dimension " + std::to_string(dim_),
                           dim_);
    }
  }

  Matrix solve(const Matrix& b) const {
    if (b.rows() != dim_) {
      throw InvalidInputError("spd_solve: right-hand side has " + std::to_string(b.rows()) +
                              " rows, expected " + std::to_string(dim_));
    }
    return llt_.solve(b);
  }

  Eigen::Index dim() const noexcept { return dim_; }

 private:
  Eigen::LLT<Matrix> llt_;
  Eigen::Index dim_;
};

inline Matrix spd_solve(const SymMatrix& m, const Matrix& b) { return SpdFactor(m).solve(b); }

}  // namespace linalg
}  // namespace lureid
