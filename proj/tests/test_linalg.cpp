#include "imp/linalg.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace imp;

namespace {

Matrix diag3(double a, double b, double c) {
  Matrix m = Matrix::Zero(3, 3);
  m(0, 0) = a;
  m(1, 1) = b;
  m(2, 2) = c;
  return m;
}

Matrix ones2() { return Matrix::Ones(2, 2); }

}  // namespace

TEST(SymEig, DiagonalInputSortsAscending) {
  const SymEig e = sym_eig(diag3(2, 0, 0.5));
  EXPECT_NEAR(e.eigenvalues(0), 0.0, 1e-15);
  EXPECT_NEAR(e.eigenvalues(1), 0.5, 1e-15);
  EXPECT_NEAR(e.eigenvalues(2), 2.0, 1e-15);
  // Columns are a permutation of the identity with positive signs.
  EXPECT_NEAR(e.eigenvectors(1, 0), 1.0, 1e-15);
  EXPECT_NEAR(e.eigenvectors(2, 1), 1.0, 1e-15);
  EXPECT_NEAR(e.eigenvectors(0, 2), 1.0, 1e-15);
}

TEST(SymEig, RankOneMatrix) {
  const SymEig e = sym_eig(ones2());
  EXPECT_NEAR(e.eigenvalues(0), 0.0, 1e-15);
  EXPECT_NEAR(e.eigenvalues(1), 2.0, 1e-15);
  const double r = 1.0 / std::sqrt(2.0);
  EXPECT_NEAR(e.eigenvectors(0, 0), r, 1e-15);
  EXPECT_NEAR(e.eigenvectors(1, 0), -r, 1e-15);
  EXPECT_NEAR(e.eigenvectors(0, 1), r, 1e-15);
  EXPECT_NEAR(e.eigenvectors(1, 1), r, 1e-15);
}

TEST(SymEig, ReconstructsRandomCovariance) {
  const Matrix phi = oracle::gaussian(30, 8, 11);
  const CovMatrix cov = CovMatrix::from_features(phi);
  const SymEig e = sym_eig(cov);
  const double eps = 1e-9 * std::max(1.0, max_abs(cov.entries()));
  EXPECT_LE(max_abs(e.reconstruct() - cov.entries()), eps);
  EXPECT_LE(max_abs(e.eigenvectors.transpose() * e.eigenvectors - Matrix::Identity(8, 8)), 1e-9);
  for (Index i = 1; i < e.dim(); ++i) EXPECT_LE(e.eigenvalues(i - 1), e.eigenvalues(i));
}

TEST(SymEig, DeterministicAndSignNormalized) {
  const Matrix a = oracle::random_psd(6, 6, 3);
  const SymEig e1 = sym_eig(a);
  const SymEig e2 = sym_eig(a);
  EXPECT_EQ(e1.eigenvalues, e2.eigenvalues);
  EXPECT_EQ(e1.eigenvectors, e2.eigenvectors);
  for (Index c = 0; c < 6; ++c) {
    for (Index r = 0; r < 6; ++r) {
      if (std::abs(e1.eigenvectors(r, c)) > 1e-12) {
        EXPECT_GT(e1.eigenvectors(r, c), 0.0);
        break;
      }
    }
  }
}

TEST(SymEig, RejectsNonSymmetricAndNonFinite) {
  Matrix a = ones2();
  a(0, 1) = 1.5;
  EXPECT_THROW(sym_eig(a), LinalgError);
  Matrix b = ones2();
  b(0, 0) = std::nan("");
  EXPECT_THROW(sym_eig(b), LinalgError);
  EXPECT_THROW(sym_eig(Matrix::Ones(2, 3)), LinalgError);
  EXPECT_THROW(CovMatrix{a}, LinalgError);
}

TEST(SymEig, CovarianceMustBePsd) {
  Matrix a = Matrix::Identity(2, 2);
  a(1, 1) = -1.0;
  EXPECT_THROW(sym_eig(CovMatrix(a)), LinalgError);
  EXPECT_NO_THROW(sym_eig(a));
}

TEST(SymEig, DefaultRankTolFollowsScale) {
  const Matrix phi = oracle::gaussian(40, 5, 5);
  const CovMatrix cov = CovMatrix::from_features(phi);
  const SymEig e = sym_eig(cov);
  EXPECT_DOUBLE_EQ(e.rank_tol, 1e-10 * 40 * e.eigenvalues(4));
  EXPECT_DOUBLE_EQ(sym_eig(cov, 0.25).rank_tol, 0.25);
}

TEST(PseudoInverse, Examples) {
  Matrix d = Matrix::Zero(2, 2);
  d(0, 0) = 2.0;
  const Matrix pd = pseudo_inverse(sym_eig(d));
  EXPECT_NEAR(pd(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(pd(1, 1), 0.0, 1e-15);
  EXPECT_NEAR(pd(0, 1), 0.0, 1e-15);

  EXPECT_LE(max_abs(pseudo_inverse(sym_eig(Matrix(Matrix::Identity(4, 4)))) - Matrix::Identity(4, 4)),
            1e-15);

  const Matrix a = ones2();
  const Matrix pa = pseudo_inverse(sym_eig(a));
  EXPECT_LE(max_abs(pa - Matrix::Constant(2, 2, 0.25)), 1e-15);
  EXPECT_LE(max_abs(pa * a * pa - pa), 1e-15);
}

TEST(PseudoInverse, PenroseIdentitiesOnRankDeficientMatrices) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Index p = 4 + static_cast<Index>(seed % 5);
    const Matrix a = oracle::random_psd(p, p / 2, seed);
    const SymEig e = sym_eig(a);
    const Matrix pa = pseudo_inverse(e);
    EXPECT_LE(max_abs(pa * a * pa - pa), 1e-8);
    EXPECT_LE(max_abs(a * pa * a - a), 1e-8);
    EXPECT_LE(max_abs(pa - pa.transpose()), 1e-15);
    // Sigma^+ Sigma is the orthogonal projector onto range(Sigma).
    EXPECT_LE(max_abs(pa * a - range_projector(e)), 1e-8);
    EXPECT_LE(max_abs(pa - oracle::pinv(a)), 1e-8);
    EXPECT_EQ(e.rank(), p / 2);
  }
}

TEST(PseudoInverse, MatchesLinearSolveWhenInvertible) {
  const Matrix a = oracle::random_psd(7, 7, 42) + 0.1 * Matrix::Identity(7, 7);
  const Matrix direct = a.ldlt().solve(Matrix::Identity(7, 7));
  EXPECT_LE(max_abs(pseudo_inverse(sym_eig(a)) - direct), 1e-8);
  const Vector rhs = oracle::gaussian_vector(7, 1);
  EXPECT_LE((pseudo_solve(sym_eig(a), rhs) - a.ldlt().solve(rhs)).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(SpectralQueries, MinNonzeroEig) {
  EXPECT_DOUBLE_EQ(min_nonzero_eig(sym_eig(diag3(2, 0, 0.5))), 0.5);
  EXPECT_NEAR(min_nonzero_eig(sym_eig(Matrix(Matrix::Identity(4, 4)))), 1.0, 1e-15);
  Matrix u = Matrix::Constant(3, 3, 0.5);
  u.diagonal().setOnes();
  EXPECT_NEAR(min_nonzero_eig(sym_eig(u)), 0.5, 1e-14);
  EXPECT_THROW(min_nonzero_eig(sym_eig(Matrix(Matrix::Zero(3, 3)))), std::domain_error);
}

TEST(SpectralQueries, OperatorNorm) {
  EXPECT_DOUBLE_EQ(operator_norm(sym_eig(diag3(2, 0, 0.5))), 2.0);
  EXPECT_DOUBLE_EQ(operator_norm(sym_eig(Matrix(Matrix::Zero(3, 3)))), 0.0);
  Matrix u = Matrix::Constant(3, 3, 0.5);
  u.diagonal().setOnes();
  EXPECT_NEAR(operator_norm(sym_eig(u)), 2.0, 1e-14);
}

TEST(SpectralQueries, InterlacingOnFullRankPrincipalSubmatrices) {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const Matrix phi = oracle::gaussian(20, 6, 100 + seed);
    const CovMatrix cov = CovMatrix::from_features(phi);
    const double full = min_nonzero_eig(sym_eig(cov));
    std::vector<Index> idx;
    for (Index i = 0; i < 6; ++i)
      if ((seed >> (i % 4)) & 1U || i == 0) idx.push_back(i);
    const double sub = min_nonzero_eig(sym_eig(cov.restrict_to(idx)));
    EXPECT_GE(sub, full - 1e-12);
  }
}

TEST(CovMatrix, FromFeaturesIsExactlySymmetric) {
  const Matrix phi = oracle::gaussian(13, 9, 8);
  const CovMatrix cov = CovMatrix::from_features(phi);
  EXPECT_EQ(cov.entries(), cov.entries().transpose());
  EXPECT_EQ(cov.source_n(), 13);
  EXPECT_LE(max_abs(cov.entries() - phi.transpose() * phi / 13.0), 1e-12);
}
