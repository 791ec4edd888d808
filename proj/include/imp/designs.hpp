#pragma once

// Seeded generators for design matrices, sparse signals and sub-Gaussian
// noise. Every generator is a pure function of its arguments and seed.

#include "imp/feature_set.hpp"
#include "imp/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace imp {

class DesignError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline Matrix gaussian_matrix(Index rows, Index cols, CounterRng& rng) {
  Matrix g(rows, cols);
  for (Index c = 0; c < cols; ++c)
    for (Index r = 0; r < rows; ++r) g(r, c) = rng.normal();
  return g;
}

namespace detail {

/// n x p matrix with orthonormal columns from the QR factorization of a
/// seeded Gaussian matrix.
inline Matrix orthonormal_columns(Index n, Index p, std::uint64_t seed) {
  CounterRng rng(seed);
  const Matrix g = gaussian_matrix(n, p, rng);
  Eigen::HouseholderQR<Matrix> qr(g);
  return qr.householderQ() * Matrix::Identity(n, p);
}

inline void require_dims(Index n, Index p, const char* what) {
  if (n < 1 || p < 1) throw DesignError(std::string(what) + ": n and p must be positive");
}

}  // namespace detail

/// Phi = sqrt(n) Q, so Sigma = I.
inline FeatureSet gen_orthonormal_design(Index n, Index p, std::uint64_t seed) {
  detail::require_dims(n, p, "gen_orthonormal_design");
  if (n < p) {
    throw DesignError("gen_orthonormal_design: n = " + std::to_string(n) + " < p = " +
                      std::to_string(p) + ", Sigma = I is impossible");
  }
  return FeatureSet(std::sqrt(static_cast<double>(n)) * detail::orthonormal_columns(n, p, seed));
}

/// Sigma = (1 - alpha) I + alpha 1 1^T.
inline Matrix uniform_corr_matrix(Index p, double alpha) {
  Matrix s = Matrix::Constant(p, p, alpha);
  s.diagonal().setOnes();
  return s;
}

/// Phi = sqrt(n) Q Sigma^{1/2} with Sigma the uniform-correlation matrix.
inline FeatureSet gen_uniform_corr_design(Index n, Index p, double alpha, std::uint64_t seed) {
  detail::require_dims(n, p, "gen_uniform_corr_design");
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw DesignError("gen_uniform_corr_design: alpha must lie in (0, 1)");
  }
  if (n < p) throw DesignError("gen_uniform_corr_design: requires n >= p");
  const Matrix root = sqrt_psd(sym_eig(CovMatrix(uniform_corr_matrix(p, alpha))));
  return FeatureSet(std::sqrt(static_cast<double>(n)) * detail::orthonormal_columns(n, p, seed) *
                    root);
}

/// max_{i,j} |Sigma_ij - 1{i = j}|.
inline double measure_delta_pw(const CovMatrix& cov) {
  const Matrix& s = cov.entries();
  return max_abs(s - Matrix::Identity(s.rows(), s.cols()));
}

struct IncoherentDesign {
  FeatureSet features;
  double delta_pw;
};

/// Gaussian Phi with each column rescaled to squared norm n (Sigma_ii = 1).
/// A column that comes out exactly zero is redrawn from the same stream.
inline IncoherentDesign gen_incoherent_design(Index n, Index p, std::uint64_t seed) {
  detail::require_dims(n, p, "gen_incoherent_design");
  CounterRng rng(seed);
  Matrix phi = gaussian_matrix(n, p, rng);
  const double root_n = std::sqrt(static_cast<double>(n));
  for (Index c = 0; c < p; ++c) {
    double norm = phi.col(c).norm();
    while (norm == 0.0) {
      for (Index r = 0; r < n; ++r) phi(r, c) = rng.normal();
      norm = phi.col(c).norm();
    }
    phi.col(c) *= root_n / norm;
  }
  FeatureSet fs(std::move(phi));
  const double delta = measure_delta_pw(fs.covariance());
  return {std::move(fs), delta};
}

enum class DesignKind { Orthonormal, UniformCorr, Incoherent };

inline std::string to_string(DesignKind k) {
  switch (k) {
    case DesignKind::Orthonormal: return "orthonormal";
    case DesignKind::UniformCorr: return "uniform_corr";
    case DesignKind::Incoherent: return "incoherent";
  }
  return "?";
}

inline DesignKind parse_design_kind(std::string_view s) {
  if (s == "orthonormal") return DesignKind::Orthonormal;
  if (s == "uniform_corr") return DesignKind::UniformCorr;
  if (s == "incoherent") return DesignKind::Incoherent;
  throw DesignError("unknown design kind '" + std::string(s) + "'");
}

struct DesignParams {
  DesignKind kind = DesignKind::Orthonormal;
  Index n = 0;
  Index p = 0;
  double alpha = 0.1;  // uniform_corr only
};

struct Design {
  FeatureSet features;
  double delta_pw;
};

inline Design make_design(const DesignParams& d, std::uint64_t seed) {
  switch (d.kind) {
    case DesignKind::Orthonormal: {
      FeatureSet fs = gen_orthonormal_design(d.n, d.p, seed);
      const double delta = measure_delta_pw(fs.covariance());
      return {std::move(fs), delta};
    }
    case DesignKind::UniformCorr: {
      FeatureSet fs = gen_uniform_corr_design(d.n, d.p, d.alpha, seed);
      const double delta = measure_delta_pw(fs.covariance());
      return {std::move(fs), delta};
    }
    case DesignKind::Incoherent: {
      IncoherentDesign inc = gen_incoherent_design(d.n, d.p, seed);
      return {std::move(inc.features), inc.delta_pw};
    }
  }
  throw DesignError("make_design: unknown design kind");
}

enum class AmplitudeLaw { Constant, Uniform, Rademacher };

inline std::string to_string(AmplitudeLaw a) {
  switch (a) {
    case AmplitudeLaw::Constant: return "constant";
    case AmplitudeLaw::Uniform: return "uniform";
    case AmplitudeLaw::Rademacher: return "rademacher";
  }
  return "?";
}

inline AmplitudeLaw parse_amplitude_law(std::string_view s) {
  if (s == "constant") return AmplitudeLaw::Constant;
  if (s == "uniform") return AmplitudeLaw::Uniform;
  if (s == "rademacher") return AmplitudeLaw::Rademacher;
  throw DesignError("unknown amplitude law '" + std::string(s) + "'");
}

struct SparseSignal {
  Vector s;
  std::vector<Index> support;  // ascending
};

/// Uniformly random support of size k. On the support the entries are
/// +gamma (constant), Uniform[gamma, 2 gamma] (uniform) or +-gamma with fair
/// signs (rademacher).
inline SparseSignal gen_sparse_signal(Index p, Index k, double gamma, AmplitudeLaw law,
                                      std::uint64_t seed) {
  if (p < 1 || k < 1 || k > p) throw DesignError("gen_sparse_signal: requires 1 <= k <= p");
  if (!(gamma > 0.0)) throw DesignError("gen_sparse_signal: gamma must be positive");
  CounterRng rng(seed);
  std::vector<Index> pool(static_cast<std::size_t>(p));
  std::iota(pool.begin(), pool.end(), Index{0});
  for (Index i = 0; i < k; ++i) {
    const auto j = i + static_cast<Index>(rng.below(static_cast<std::uint64_t>(p - i)));
    std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
  }
  SparseSignal out{Vector::Zero(p), {pool.begin(), pool.begin() + k}};
  std::sort(out.support.begin(), out.support.end());
  for (Index i : out.support) {
    switch (law) {
      case AmplitudeLaw::Constant: out.s(i) = gamma; break;
      case AmplitudeLaw::Uniform: out.s(i) = rng.uniform(gamma, 2.0 * gamma); break;
      case AmplitudeLaw::Rademacher: out.s(i) = gamma * rng.sign(); break;
    }
  }
  return out;
}

enum class NoiseKind { Gaussian, Rademacher, Uniform };

inline std::string to_string(NoiseKind k) {
  switch (k) {
    case NoiseKind::Gaussian: return "gaussian";
    case NoiseKind::Rademacher: return "rademacher";
    case NoiseKind::Uniform: return "uniform";
  }
  return "?";
}

inline NoiseKind parse_noise_kind(std::string_view s) {
  if (s == "gaussian") return NoiseKind::Gaussian;
  if (s == "rademacher") return NoiseKind::Rademacher;
  if (s == "uniform") return NoiseKind::Uniform;
  throw DesignError("unknown noise kind '" + std::string(s) + "'");
}

/// iid zero-mean noise with variance proxy at most sigma^2: N(0, sigma^2),
/// sigma * (+-1), or Uniform[-sigma, sigma].
inline Vector sample_noise(NoiseKind kind, double sigma, Index n, std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw DesignError("sample_noise: sigma must be >= 0");
  Vector xi(n);
  CounterRng rng(seed);
  for (Index i = 0; i < n; ++i) {
    switch (kind) {
      case NoiseKind::Gaussian: xi(i) = sigma * rng.normal(); break;
      case NoiseKind::Rademacher: xi(i) = sigma * rng.sign(); break;
      case NoiseKind::Uniform: xi(i) = rng.uniform(-sigma, sigma); break;
    }
  }
  if (sigma == 0.0) xi.setZero();
  return xi;
}

struct SignalParams {
  Index k = 1;
  double gamma = 1.0;
  AmplitudeLaw law = AmplitudeLaw::Rademacher;
};

struct NoiseParams {
  NoiseKind kind = NoiseKind::Gaussian;
  double sigma = 0.0;
};

/// Observation model y = Phi s + xi with its provenance.
struct SparseProblem {
  FeatureSet features;
  Vector signal;
  std::vector<Index> support;
  Vector noise;
  NoiseKind noise_kind = NoiseKind::Gaussian;
  double sigma = 0.0;
  double gamma = 1.0;
  AmplitudeLaw law = AmplitudeLaw::Rademacher;
  double delta_pw = 0.0;
  std::uint64_t seed = 0;

  Index k() const { return static_cast<Index>(support.size()); }
};

/// Sub-stream identifiers for the parts of one problem.
enum class Stream : std::uint64_t { Design = 1, Signal = 2, Noise = 3 };

inline std::uint64_t stream_seed(std::uint64_t seed, Stream s) {
  return derive_seed(seed, static_cast<std::uint64_t>(s));
}

/// Builds y = Phi s + xi on an existing design.
inline SparseProblem problem_on_design(const Design& design, const SignalParams& sig,
                                       const NoiseParams& noise, std::uint64_t seed) {
  if (sig.k < 1) throw DesignError("assemble_problem: k = 0, the support must be nonempty");
  const FeatureSet& fs = design.features;
  SparseSignal signal = gen_sparse_signal(fs.p(), sig.k, sig.gamma, sig.law,
                                          stream_seed(seed, Stream::Signal));
  Vector xi = sample_noise(noise.kind, noise.sigma, fs.n(), stream_seed(seed, Stream::Noise));
  Vector y = fs.phi() * signal.s + xi;
  return SparseProblem{fs.with_targets(std::move(y)),
                       std::move(signal.s),
                       std::move(signal.support),
                       std::move(xi),
                       noise.kind,
                       noise.sigma,
                       sig.gamma,
                       sig.law,
                       design.delta_pw,
                       seed};
}

inline SparseProblem assemble_problem(const DesignParams& design, const SignalParams& sig,
                                      const NoiseParams& noise, std::uint64_t seed) {
  if (sig.k < 1) throw DesignError("assemble_problem: k = 0, the support must be nonempty");
  return problem_on_design(make_design(design, stream_seed(seed, Stream::Design)), sig, noise,
                           seed);
}

}  // namespace imp
