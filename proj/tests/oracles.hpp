#pragma once

// Test-only reference computations. None of these go through the library's
// eigendecomposition path: pseudo-inverses come from an SVD, least squares
// from QR, and the flow ODE from the exact scalar solution.

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <vector>

namespace oracle {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Moore-Penrose pseudo-inverse via a complete orthogonal decomposition.
inline Matrix pinv(const Matrix& a) {
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(a);
  cod.setThreshold(1e-10);
  return cod.pseudoInverse();
}

/// Minimum-norm least-squares solution of Phi w = y.
inline Vector min_norm_lstsq(const Matrix& phi, const Vector& y) {
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(phi);
  cod.setThreshold(1e-10);
  return cod.solve(y);
}

/// Standard-normal matrix from std::mt19937_64 (independent of the library RNG).
inline Matrix gaussian(Index rows, Index cols, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> d;
  Matrix m(rows, cols);
  for (Index c = 0; c < cols; ++c)
    for (Index r = 0; r < rows; ++r) m(r, c) = d(gen);
  return m;
}

inline Vector gaussian_vector(Index n, std::uint64_t seed) { return gaussian(n, 1, seed).col(0); }

/// Random PSD matrix B B^T / cols of the requested rank.
inline Matrix random_psd(Index p, Index rank, std::uint64_t seed) {
  const Matrix b = gaussian(p, rank, seed);
  Matrix a = b * b.transpose() / static_cast<double>(std::max<Index>(rank, 1));
  return 0.5 * (a + a.transpose());
}

/// IMP by brute force: every round solves the restricted minimum-norm least
/// squares problem directly (w_init = 0, infinite horizon) and removes the
/// smallest |w|, lowest index on ties.
inline std::vector<Index> imp_order_bruteforce(const Matrix& phi, const Vector& y) {
  std::vector<Index> active;
  for (Index j = 0; j < phi.cols(); ++j) active.push_back(j);
  std::vector<Index> order;
  while (!active.empty()) {
    Matrix sub(phi.rows(), static_cast<Index>(active.size()));
    for (std::size_t a = 0; a < active.size(); ++a) sub.col(static_cast<Index>(a)) = phi.col(active[a]);
    const Vector w = min_norm_lstsq(sub, y);
    std::size_t best = 0;
    for (std::size_t a = 1; a < active.size(); ++a)
      if (std::abs(w(static_cast<Index>(a))) < std::abs(w(static_cast<Index>(best)))) best = a;
    order.push_back(active[best]);
    active.erase(active.begin() + static_cast<std::ptrdiff_t>(best));
  }
  return order;
}

}  // namespace oracle
