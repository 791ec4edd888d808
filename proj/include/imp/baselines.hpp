#pragma once

// Comparison estimators: the alignment heuristic ranking, hard thresholding
// of the least-squares estimate, and iterative hard thresholding.

#include "imp/feature_set.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace imp {

/// |phi_j^T y| for every feature j.
inline Vector alignment_scores(const FeatureSet& features) {
  return (features.phi().transpose() * features.targets()).cwiseAbs();
}

/// Feature indices (0-based) by ascending |phi_j^T y|; equal scores keep the
/// lower index first.
inline std::vector<Index> alignment_order(const FeatureSet& features) {
  const Vector scores = alignment_scores(features);
  std::vector<Index> order(static_cast<std::size_t>(features.p()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return scores(a) < scores(b); });
  return order;
}

/// H_tau(z) = z if |z| > tau, else 0, elementwise.
inline Vector hard_threshold(const Vector& v, double tau) {
  if (!(tau >= 0.0)) throw std::invalid_argument("hard_threshold: tau must be >= 0");
  Vector out = v;
  for (Index i = 0; i < out.size(); ++i)
    if (!(std::abs(out(i)) > tau)) out(i) = 0.0;
  return out;
}

/// Least-squares estimate (1/n) Sigma^+ Phi^T y.
inline Vector least_squares_estimate(const FeatureSet& features) {
  return pseudo_solve(features.eig(), features.moment());
}

inline Vector ht_estimator(const FeatureSet& features, double tau) {
  return hard_threshold(least_squares_estimate(features), tau);
}

/// Iterative hard thresholding settings. The step is taken on the
/// mean-squared-error gradient, s <- H_tau(s + eta (1/n) Phi^T (y - Phi s)),
/// so eta = 1 on a design with Sigma = I is a unit step.
struct ThresholdConfig {
  double tau = 0.0;
  double eta = 1.0;
  long max_iters = 10000;
  Vector init;  // empty means zero
  double convergence_tol = 1e-10;

  void validate(Index p) const {
    if (!(tau >= 0.0)) throw std::invalid_argument("ThresholdConfig: tau must be >= 0");
    if (!(eta > 0.0)) throw std::invalid_argument("ThresholdConfig: eta must be > 0");
    if (max_iters < 1) throw std::invalid_argument("ThresholdConfig: max_iters must be >= 1");
    if (!(convergence_tol >= 0.0)) {
      throw std::invalid_argument("ThresholdConfig: convergence_tol must be >= 0");
    }
    if (init.size() != 0 && init.size() != p) {
      throw std::invalid_argument("ThresholdConfig: init length does not match feature count");
    }
  }
};

struct IhtResult {
  Vector estimate;
  long iters_used = 0;
  bool converged = false;
};

class IhtDivergence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kIhtDivergenceBound = 1e12;

/// Iterates until the sup-norm change is within convergence_tol or max_iters
/// updates have been applied. `iters_used` counts updates, including the one
/// that confirmed convergence.
inline IhtResult iht(const FeatureSet& features, const ThresholdConfig& config) {
  const Index p = features.p();
  config.validate(p);
  const double inv_n = 1.0 / static_cast<double>(features.n());
  const Matrix& phi = features.phi();
  const Vector& y = features.targets();

  IhtResult out;
  out.estimate = config.init.size() == 0 ? Vector::Zero(p) : config.init;
  for (long it = 1; it <= config.max_iters; ++it) {
    const Vector grad_step = inv_n * (phi.transpose() * (y - phi * out.estimate));
    Vector next = hard_threshold(out.estimate + config.eta * grad_step, config.tau);
    if (!next.allFinite() || next.cwiseAbs().maxCoeff() > kIhtDivergenceBound) {
      throw IhtDivergence("iht: iterate exceeded 1e12, step size too large for spectrum");
    }
    const double change = p == 0 ? 0.0 : (next - out.estimate).cwiseAbs().maxCoeff();
    out.estimate = std::move(next);
    out.iters_used = it;
    if (change <= config.convergence_tol) {
      out.converged = true;
      break;
    }
  }
  return out;
}

/// Indices of the nonzero entries.
inline std::vector<Index> support_of(const Vector& v) {
  std::vector<Index> out;
  for (Index i = 0; i < v.size(); ++i)
    if (v(i) != 0.0) out.push_back(i);
  return out;
}

struct SupportScore {
  bool exact = false;
  double f1 = 0.0;
};

/// Exact-match flag and F1 of an estimated support against the true one.
/// Both empty counts as a perfect match.
inline SupportScore score_support(const std::vector<Index>& estimated,
                                  const std::vector<Index>& truth) {
  std::vector<Index> e = estimated, t = truth;
  std::sort(e.begin(), e.end());
  std::sort(t.begin(), t.end());
  std::vector<Index> both;
  std::set_intersection(e.begin(), e.end(), t.begin(), t.end(), std::back_inserter(both));
  SupportScore s;
  s.exact = (e == t);
  const double denom = static_cast<double>(e.size() + t.size());
  s.f1 = denom == 0.0 ? 1.0 : 2.0 * static_cast<double>(both.size()) / denom;
  return s;
}

}  // namespace imp
