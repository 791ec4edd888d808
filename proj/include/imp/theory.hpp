#pragma once

// Executable checks for the support-recovery analysis: the orthogonal
// nullspace property, per-round recoverability, sample-size bounds, and a
// Monte Carlo estimate of the noise-functional tail probability.

#include "imp/designs.hpp"
#include "imp/feature_set.hpp"
#include "imp/parallel.hpp"
#include "imp/rng.hpp"
#include "imp/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

namespace imp {

struct OnpReport {
  bool holds = false;
  Index null_dim = 0;
  double max_violation = 0.0;
  std::size_t generators_checked = 0;
  bool vacuous = false;  // empty support: the cone is {0}
};

/// Checks null(A) orthogonal to span C(S) using the generators
/// {e_i : i in S} and {e_i + e_j, e_i - e_j : i in S, j not in S}.
/// Note that for nonempty S these span the whole space, so the property
/// holds exactly when the null space is trivial.
inline OnpReport check_onp(const SymEig& eig, const std::vector<Index>& support, double tol) {
  const Index p = eig.dim();
  std::vector<bool> in_s(static_cast<std::size_t>(p), false);
  for (Index i : support) {
    if (i < 0 || i >= p) throw std::out_of_range("check_onp: support index out of range");
    in_s[static_cast<std::size_t>(i)] = true;
  }
  const Matrix null = eig.null_basis();

  OnpReport r;
  r.null_dim = null.cols();
  if (support.empty()) {
    r.vacuous = true;
    r.holds = true;
    return r;
  }
  for (Index i : support) {
    ++r.generators_checked;
    for (Index u = 0; u < null.cols(); ++u)
      r.max_violation = std::max(r.max_violation, std::abs(null(i, u)));
    for (Index j = 0; j < p; ++j) {
      if (in_s[static_cast<std::size_t>(j)]) continue;
      r.generators_checked += 2;
      for (Index u = 0; u < null.cols(); ++u) {
        r.max_violation = std::max(r.max_violation, std::abs(null(i, u) + null(j, u)));
        r.max_violation = std::max(r.max_violation, std::abs(null(i, u) - null(j, u)));
      }
    }
  }
  r.holds = r.max_violation <= tol;
  return r;
}

inline OnpReport check_onp(const CovMatrix& cov, const std::vector<Index>& support, double tol,
                           std::optional<double> rank_tol = std::nullopt) {
  return check_onp(sym_eig(cov, rank_tol), support, tol);
}

struct Recoverability {
  bool recoverable = false;
  double residual = 0.0;  // ||Upsilon^+ Upsilon s - s||_inf
};

inline Recoverability check_recoverable(const SymEig& upsilon, const Vector& s_active,
                                        double tol) {
  if (s_active.size() != upsilon.dim()) {
    throw std::invalid_argument("check_recoverable: dimension mismatch");
  }
  Recoverability r;
  const Vector projected = range_projector(upsilon) * s_active;
  r.residual = s_active.size() == 0 ? 0.0 : (projected - s_active).cwiseAbs().maxCoeff();
  r.recoverable = r.residual <= tol;
  return r;
}

inline Recoverability check_recoverable(const CovMatrix& cov_active, const Vector& s_active,
                                        double tol,
                                        std::optional<double> rank_tol = std::nullopt) {
  if (s_active.size() != cov_active.dim()) {
    throw std::invalid_argument("check_recoverable: dimension mismatch");
  }
  return check_recoverable(sym_eig(cov_active, rank_tol), s_active, tol);
}

/// Inputs to the sample-size bounds. `scale` is gamma for the support
/// recovery bound and epsilon for the concentration bound.
struct BoundInputs {
  double sigma = 1.0;
  double scale = 1.0;
  double lambda_min_nz = 1.0;
  Index p = 1;
  double delta = 0.1;

  void validate() const {
    if (!(sigma > 0.0) || !(scale > 0.0) || !(lambda_min_nz > 0.0) || p < 1) {
      throw std::invalid_argument("BoundInputs: sigma, scale, lambda and p must be positive");
    }
    if (!(delta > 0.0 && delta < 1.0)) {
      throw std::invalid_argument("BoundInputs: delta must lie in (0, 1)");
    }
  }
};

namespace detail {

/// constant * sigma^2 / (scale^2 * lambda) * ln(2p / delta). Evaluated so that
/// constant 8 at scale gamma and constant 2 at scale gamma/2 round identically.
inline double concentration_bound(double constant, const BoundInputs& b) {
  b.validate();
  const double numerator = constant * b.sigma * b.sigma;
  const double denominator = b.scale * b.scale * b.lambda_min_nz;
  return numerator / denominator * std::log(2.0 * static_cast<double>(b.p) / b.delta);
}

inline Index ceil_to_index(double v) { return static_cast<Index>(std::ceil(v)); }

}  // namespace detail

/// 8 sigma^2 / (gamma^2 lambda) ln(2p / delta), before rounding up.
inline double sample_bound_thm1_value(const BoundInputs& b) {
  return detail::concentration_bound(8.0, b);
}

inline Index sample_bound_thm1(const BoundInputs& b) {
  return detail::ceil_to_index(sample_bound_thm1_value(b));
}

/// 2 sigma^2 / (epsilon^2 lambda) ln(2p / delta), before rounding up.
inline double sample_bound_lemma1_value(const BoundInputs& b) {
  return detail::concentration_bound(2.0, b);
}

inline Index sample_bound_lemma1(const BoundInputs& b) {
  return detail::ceil_to_index(sample_bound_lemma1_value(b));
}

/// (1/n) Sigma^+ Phi^T xi.
inline Vector noise_functional(const FeatureSet& features, const Vector& xi) {
  if (xi.size() != features.n()) throw std::invalid_argument("noise_functional: length mismatch");
  return pseudo_solve(features.eig(),
                      (features.phi().transpose() * xi) / static_cast<double>(features.n()));
}

/// Fraction of trials with max_j |((1/n) Sigma^+ Phi^T xi)_j| >= epsilon.
/// Trial t draws its noise from derive_seed(seed, t). `pass` compares the
/// rate against `delta`.
inline McSummary lemma1_mc(const FeatureSet& features, const NoiseParams& noise, double epsilon,
                           std::size_t trials, std::uint64_t seed, double delta = 1.0,
                           unsigned threads = 1) {
  if (trials < 1) throw std::invalid_argument("lemma1_mc: trials must be >= 1");
  if (!(epsilon >= 0.0)) throw std::invalid_argument("lemma1_mc: epsilon must be >= 0");
  const Index n = features.n();
  const Matrix op = pseudo_inverse(features.eig()) * features.phi().transpose() /
                    static_cast<double>(n);
  std::vector<char> exceeded(trials, 0);
  parallel_for(trials, threads, [&](std::size_t t) {
    const Vector xi = sample_noise(noise.kind, noise.sigma, n, derive_seed(seed, t));
    const double m = (op * xi).cwiseAbs().maxCoeff();
    exceeded[t] = m >= epsilon ? 1 : 0;
  });
  std::size_t count = 0;
  for (char e : exceeded) count += static_cast<std::size_t>(e);
  return summarize(trials, count, delta, {{"exceedance", count}});
}

}  // namespace imp
