#include "imp/baselines.hpp"
#include "imp/designs.hpp"
#include "imp/imp.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <limits>

using namespace imp;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Index>(xs.size()));
  Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

// Noiseless problem on an orthonormal design with known support.
SparseProblem noiseless(Index n, Index p, Index k, std::uint64_t seed) {
  return assemble_problem({DesignKind::Orthonormal, n, p, 0.0},
                          {k, 1.0, AmplitudeLaw::Rademacher}, {NoiseKind::Gaussian, 0.0}, seed);
}

}  // namespace

TEST(AlignmentOrder, Examples) {
  // Phi = I, so Phi^T y = y.
  EXPECT_EQ(alignment_order(FeatureSet(Matrix::Identity(3, 3), vec({0.5, -2, 1}))),
            (std::vector<Index>{0, 2, 1}));
  EXPECT_EQ(alignment_order(FeatureSet(Matrix::Identity(4, 4), vec({1, -1, 1, -1}))),
            (std::vector<Index>{0, 1, 2, 3}));
  EXPECT_EQ(alignment_order(FeatureSet(oracle::gaussian(6, 4, 1))), (std::vector<Index>{0, 1, 2, 3}));
}

TEST(AlignmentOrder, InvariantUnderPositiveRescaling) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const FeatureSet f(oracle::gaussian(10, 7, seed), oracle::gaussian_vector(10, seed + 9));
    const auto base = alignment_order(f);
    for (double c : {1e-3, 0.5, 3.0, 1e4}) EXPECT_EQ(alignment_order(f.with_targets(c * f.targets())), base);
  }
}

TEST(HardThreshold, Examples) {
  EXPECT_EQ(hard_threshold(vec({0.5, -2, 1}), 1.0), vec({0, -2, 0}));
  EXPECT_EQ(hard_threshold(vec({0.0, -1e-300, 3}), 0.0), vec({0.0, -1e-300, 3}));
  EXPECT_THROW(hard_threshold(vec({1}), -1.0), std::invalid_argument);
}

TEST(HardThreshold, SupportShrinksAndIdempotent) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Vector v = oracle::gaussian_vector(15, seed);
    const double tau = 0.1 * static_cast<double>(seed % 10);
    const Vector h = hard_threshold(v, tau);
    EXPECT_EQ(hard_threshold(h, tau), h);
    for (Index i = 0; i < v.size(); ++i) {
      if (h(i) != 0.0) {
        EXPECT_EQ(h(i), v(i));
        EXPECT_GT(std::abs(v(i)), tau);
      }
    }
  }
}

TEST(HtEstimator, NoiselessOrthonormalRecoversSignal) {
  const SparseProblem sp = noiseless(30, 10, 3, 5);
  const Vector est = ht_estimator(sp.features, 0.5);
  EXPECT_LE((est - sp.signal).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(support_of(est), sp.support);
}

TEST(HtEstimator, LargeTauGivesZeroAndZeroTauGivesLeastSquares) {
  const FeatureSet f(oracle::gaussian(20, 5, 3), oracle::gaussian_vector(20, 4));
  const Vector ls = least_squares_estimate(f);
  EXPECT_EQ(ht_estimator(f, ls.cwiseAbs().maxCoeff() + 1.0), Vector::Zero(5));
  const Vector ols = (f.phi().transpose() * f.phi()).ldlt().solve(f.phi().transpose() * f.targets());
  EXPECT_LE((ht_estimator(f, 0.0) - ols).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Iht, OrthonormalColumnsConvergeAfterOneStep) {
  // Sigma = I, so the first update is H_tau(s). A second update confirms it.
  const SparseProblem sp = noiseless(25, 8, 3, 17);
  ThresholdConfig c;
  c.tau = 0.5;
  const IhtResult r = iht(sp.features, c);
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.iters_used, 2);
  EXPECT_LE((r.estimate - sp.signal).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Iht, FixedPointInitAndZeroTargets) {
  const SparseProblem sp = noiseless(25, 8, 3, 18);
  ThresholdConfig c;
  c.tau = 0.5;
  c.init = sp.signal;
  const IhtResult r = iht(sp.features, c);
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.iters_used, 1);
  EXPECT_LE((r.estimate - sp.signal).cwiseAbs().maxCoeff(), 1e-12);

  const FeatureSet zero(oracle::gaussian(10, 4, 2));
  const IhtResult z = iht(zero, ThresholdConfig{});
  EXPECT_TRUE(z.converged);
  EXPECT_EQ(z.estimate, Vector::Zero(4));
}

TEST(Iht, DivergesWithOversizedStep) {
  const FeatureSet f(oracle::gaussian(20, 5, 3), oracle::gaussian_vector(20, 4));
  ThresholdConfig c;
  c.eta = 100.0;
  EXPECT_THROW(iht(f, c), IhtDivergence);
}

TEST(Iht, SupportSizeBoundedByThreshold) {
  const FeatureSet f(oracle::gaussian(30, 10, 8), oracle::gaussian_vector(30, 9));
  for (long it : {1L, 2L, 5L}) {
    ThresholdConfig c;
    c.tau = 0.3;
    c.eta = 0.5;
    c.max_iters = it;
    const IhtResult r = iht(f, c);
    for (Index i = 0; i < r.estimate.size(); ++i)
      if (r.estimate(i) != 0.0) {
        EXPECT_GT(std::abs(r.estimate(i)), 0.3);
      }
  }
}

TEST(ThresholdConfig, Validation) {
  const FeatureSet f(oracle::gaussian(10, 3, 1));
  ThresholdConfig c;
  c.eta = 0.0;
  EXPECT_THROW(iht(f, c), std::invalid_argument);
  c = {};
  c.tau = -1.0;
  EXPECT_THROW(iht(f, c), std::invalid_argument);
  c = {};
  c.init = Vector::Zero(2);
  EXPECT_THROW(iht(f, c), std::invalid_argument);
}

TEST(ScoreSupport, ExactAndF1) {
  EXPECT_TRUE(score_support({1, 3}, {3, 1}).exact);
  EXPECT_DOUBLE_EQ(score_support({1, 3}, {1, 3}).f1, 1.0);
  const SupportScore s = score_support({0, 1}, {1, 2});
  EXPECT_FALSE(s.exact);
  EXPECT_DOUBLE_EQ(s.f1, 0.5);
  EXPECT_DOUBLE_EQ(score_support({}, {1}).f1, 0.0);
  EXPECT_TRUE(score_support({}, {}).exact);
}

TEST(BaselinesAgree, NoiselessOrthonormalSupports) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const Index p = 4 + static_cast<Index>(seed % 9);
    const Index k = 1 + static_cast<Index>(seed % static_cast<std::uint64_t>(p - 1));
    const SparseProblem sp = noiseless(2 * p, p, k, 300 + seed);
    ImpConfig c;
    c.prune_rounds = static_cast<std::size_t>(p - k);
    c.w_init = Vector::Zero(p);
    const auto imp_support = support_of(run_imp(sp.features, c).final_weights);
    ThresholdConfig tc;
    tc.tau = 0.5;
    EXPECT_EQ(imp_support, sp.support) << "seed " << seed;
    EXPECT_EQ(support_of(ht_estimator(sp.features, 0.5)), sp.support);
    EXPECT_EQ(support_of(iht(sp.features, tc).estimate), sp.support);
  }
}
