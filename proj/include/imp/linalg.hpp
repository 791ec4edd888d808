#pragma once

// Dense symmetric linear algebra used throughout the library: covariance
// matrices, ordered eigendecompositions, and the eigenbasis pseudo-inverse.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace imp {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

class LinalgError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline double max_abs(const Matrix& a) {
  return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff();
}

inline bool all_finite(const Matrix& a) { return a.allFinite(); }

namespace detail {

inline double symmetry_defect(const Matrix& a) {
  return max_abs(a - a.transpose());
}

inline void require_symmetric(const Matrix& a, double tol, const char* what) {
  if (a.rows() != a.cols()) {
    std::ostringstream os;
    os << what << ": expected a square matrix, got " << a.rows() << "x"
       << a.cols();
    throw LinalgError(os.str());
  }
  if (!all_finite(a)) {
    throw LinalgError(std::string(what) + ": non-finite entries");
  }
  const double defect = symmetry_defect(a);
  if (defect > tol) {
    std::ostringstream os;
    os << what << ": matrix is not symmetric (max |A - A^T| = " << defect
       << ", tolerance " << tol << ")";
    throw LinalgError(os.str());
  }
}

}  // namespace detail

/// Default threshold below which an eigenvalue counts as zero:
/// 1e-10 * max(p, n) * lambda_max.
inline double default_rank_tol(Index p, Index source_n, double lambda_max) {
  return 1e-10 * static_cast<double>(std::max(p, source_n)) *
         std::abs(lambda_max);
}

/// Symmetric PSD matrix (1/n) Phi^T Phi, or any explicitly supplied PSD
/// matrix. `source_n` is the row count of the Phi it came from (p when the
/// entries were given directly).
class CovMatrix {
 public:
  static constexpr double kSymmetryTol = 1e-12;

  CovMatrix(Matrix entries, Index source_n)
      : entries_(std::move(entries)), source_n_(source_n) {
    detail::require_symmetric(
        entries_, kSymmetryTol * std::max(1.0, max_abs(entries_)), "CovMatrix");
    if (source_n_ < 1) throw LinalgError("CovMatrix: source_n must be positive");
  }

  explicit CovMatrix(Matrix entries)
      : CovMatrix(entries, std::max<Index>(entries.rows(), 1)) {}

  /// Sigma = (1/n) Phi^T Phi, symmetrized so the stored matrix is exactly
  /// symmetric.
  static CovMatrix from_features(const Matrix& phi) {
    if (phi.rows() < 1 || phi.cols() < 1) {
      throw LinalgError("CovMatrix::from_features: empty feature matrix");
    }
    if (!all_finite(phi)) {
      throw LinalgError("CovMatrix::from_features: non-finite features");
    }
    const double inv_n = 1.0 / static_cast<double>(phi.rows());
    Matrix s = inv_n * (phi.transpose() * phi);
    Matrix sym = 0.5 * (s + s.transpose());
    return CovMatrix(std::move(sym), phi.rows());
  }

  const Matrix& entries() const { return entries_; }
  Index dim() const { return entries_.rows(); }
  Index source_n() const { return source_n_; }

  /// Principal submatrix on `idx` (order preserved).
  CovMatrix restrict_to(const std::vector<Index>& idx) const {
    const Index m = static_cast<Index>(idx.size());
    Matrix sub(m, m);
    for (Index a = 0; a < m; ++a)
      for (Index b = 0; b < m; ++b) sub(a, b) = entries_(idx[a], idx[b]);
    return CovMatrix(std::move(sub), source_n_);
  }

 private:
  Matrix entries_;
  Index source_n_;
};

/// Eigendecomposition A = V diag(lambda) V^T with ascending eigenvalues.
/// Each eigenvector is sign-normalized so its first entry with magnitude
/// above 1e-12 is positive.
struct SymEig {
  Vector eigenvalues;
  Matrix eigenvectors;
  double rank_tol = 0.0;

  Index dim() const { return eigenvalues.size(); }

  bool is_zero(Index i) const { return eigenvalues(i) <= rank_tol; }

  Index rank() const {
    Index r = 0;
    for (Index i = 0; i < dim(); ++i) r += is_zero(i) ? 0 : 1;
    return r;
  }

  Matrix reconstruct() const {
    return eigenvectors * eigenvalues.asDiagonal() * eigenvectors.transpose();
  }

  /// Orthonormal basis of the eigenspace with eigenvalues <= rank_tol.
  Matrix null_basis() const {
    std::vector<Index> cols;
    for (Index i = 0; i < dim(); ++i)
      if (is_zero(i)) cols.push_back(i);
    Matrix basis(dim(), static_cast<Index>(cols.size()));
    for (Index c = 0; c < static_cast<Index>(cols.size()); ++c)
      basis.col(c) = eigenvectors.col(cols[c]);
    return basis;
  }
};

namespace detail {

inline void normalize_signs(Matrix& v) {
  for (Index c = 0; c < v.cols(); ++c) {
    for (Index r = 0; r < v.rows(); ++r) {
      if (std::abs(v(r, c)) > 1e-12) {
        if (v(r, c) < 0) v.col(c) = -v.col(c);
        break;
      }
    }
  }
}

inline SymEig decompose(const Matrix& a, Index source_n,
                        std::optional<double> rank_tol) {
  SymEig out;
  if (a.rows() == 0) {
    out.eigenvalues = Vector(0);
    out.eigenvectors = Matrix(0, 0);
    out.rank_tol = rank_tol.value_or(0.0);
    return out;
  }
  Eigen::SelfAdjointEigenSolver<Matrix> solver(a, Eigen::ComputeEigenvectors);
  if (solver.info() != Eigen::Success) {
    throw LinalgError("sym_eig: eigensolver did not converge");
  }
  out.eigenvalues = solver.eigenvalues();
  out.eigenvectors = solver.eigenvectors();
  normalize_signs(out.eigenvectors);
  const double lambda_max = out.eigenvalues.cwiseAbs().maxCoeff();
  out.rank_tol = rank_tol.value_or(default_rank_tol(a.rows(), source_n, lambda_max));
  if (out.rank_tol < 0.0) throw LinalgError("sym_eig: rank_tol must be nonnegative");
  return out;
}

}  // namespace detail

/// Covariance matrices must be PSD: an eigenvalue below -rank_tol is rejected.
inline SymEig sym_eig(const CovMatrix& a,
                      std::optional<double> rank_tol = std::nullopt) {
  SymEig e = detail::decompose(a.entries(), a.source_n(), rank_tol);
  if (e.dim() > 0 && e.eigenvalues(0) < -e.rank_tol) {
    std::ostringstream os;
    os << "sym_eig: covariance is not positive semidefinite (min eigenvalue "
       << e.eigenvalues(0) << ")";
    throw LinalgError(os.str());
  }
  return e;
}

/// Plain symmetric matrix; the symmetry check is relative to max |A_ij|.
inline SymEig sym_eig(const Matrix& a,
                      std::optional<double> rank_tol = std::nullopt) {
  detail::require_symmetric(
      a, CovMatrix::kSymmetryTol * std::max(1.0, max_abs(a)), "sym_eig");
  return detail::decompose(a, std::max<Index>(a.rows(), 1), rank_tol);
}

/// Inverts the eigenvalues above rank_tol, zeroes the rest, and recomposes in
/// the same basis.
inline Matrix pseudo_inverse(const SymEig& e) {
  Vector inv(e.dim());
  for (Index i = 0; i < e.dim(); ++i)
    inv(i) = e.is_zero(i) ? 0.0 : 1.0 / e.eigenvalues(i);
  Matrix p = e.eigenvectors * inv.asDiagonal() * e.eigenvectors.transpose();
  return 0.5 * (p + p.transpose());
}

/// Applies the pseudo-inverse to a vector without forming the matrix.
inline Vector pseudo_solve(const SymEig& e, const Vector& rhs) {
  Vector coeff = e.eigenvectors.transpose() * rhs;
  for (Index i = 0; i < e.dim(); ++i)
    coeff(i) = e.is_zero(i) ? 0.0 : coeff(i) / e.eigenvalues(i);
  return e.eigenvectors * coeff;
}

/// Smallest eigenvalue strictly above rank_tol. Throws when every eigenvalue
/// is numerically zero, since the quantity is then undefined.
inline double min_nonzero_eig(const SymEig& e) {
  for (Index i = 0; i < e.dim(); ++i) {
    if (!e.is_zero(i)) return e.eigenvalues(i);
  }
  throw std::domain_error(
      "min_nonzero_eig: zero matrix, smallest non-zero eigenvalue undefined");
}

inline double operator_norm(const SymEig& e) {
  return e.dim() == 0 ? 0.0 : e.eigenvalues.cwiseAbs().maxCoeff();
}

/// Orthogonal projector onto range(A): A^+ A expressed in the eigenbasis.
inline Matrix range_projector(const SymEig& e) {
  Vector d(e.dim());
  for (Index i = 0; i < e.dim(); ++i) d(i) = e.is_zero(i) ? 0.0 : 1.0;
  return e.eigenvectors * d.asDiagonal() * e.eigenvectors.transpose();
}

/// Symmetric square root from the eigendecomposition; negative eigenvalues
/// within rank_tol are clamped to zero.
inline Matrix sqrt_psd(const SymEig& e) {
  Vector r(e.dim());
  for (Index i = 0; i < e.dim(); ++i) {
    const double l = e.eigenvalues(i);
    if (l < -e.rank_tol) throw LinalgError("sqrt_psd: matrix is not PSD");
    r(i) = std::sqrt(std::max(l, 0.0));
  }
  return e.eigenvectors * r.asDiagonal() * e.eigenvectors.transpose();
}

/// Columns of `a` at `idx`, in order.
inline Matrix select_columns(const Matrix& a, const std::vector<Index>& idx) {
  Matrix out(a.rows(), static_cast<Index>(idx.size()));
  for (Index c = 0; c < static_cast<Index>(idx.size()); ++c) out.col(c) = a.col(idx[c]);
  return out;
}

inline Vector select_entries(const Vector& v, const std::vector<Index>& idx) {
  Vector out(static_cast<Index>(idx.size()));
  for (Index c = 0; c < static_cast<Index>(idx.size()); ++c) out(c) = v(idx[c]);
  return out;
}

}  // namespace imp
