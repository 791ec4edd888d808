#pragma once

#include "imp/linalg.hpp"

#include <memory>
#include <optional>

namespace imp {

/// Design matrix Phi (n x p, one example per row), targets y, and the cached
/// covariance Sigma = (1/n) Phi^T Phi together with its eigendecomposition.
/// Immutable; copies share the cached decomposition.
class FeatureSet {
 public:
  static constexpr double kNormalizedTol = 1e-8;

  FeatureSet(Matrix phi, Vector targets, std::optional<double> rank_tol = std::nullopt)
      : phi_(std::move(phi)),
        targets_(std::move(targets)),
        covariance_(CovMatrix::from_features(phi_)) {
    if (targets_.size() != phi_.rows()) {
      throw LinalgError("FeatureSet: targets length " + std::to_string(targets_.size()) +
                        " does not match row count " + std::to_string(phi_.rows()));
    }
    if (!targets_.allFinite()) throw LinalgError("FeatureSet: non-finite targets");
    eig_ = std::make_shared<const SymEig>(sym_eig(covariance_, rank_tol));
    const Vector diag = covariance_.entries().diagonal();
    normalized_ = (diag.array() - 1.0).abs().maxCoeff() <= kNormalizedTol;
  }

  /// Features with zero targets (for design generators).
  explicit FeatureSet(Matrix phi) : FeatureSet(phi, Vector::Zero(phi.rows())) {}

  /// Same features, new targets; the cached decomposition is reused.
  FeatureSet with_targets(Vector y) const {
    if (y.size() != phi_.rows()) throw LinalgError("FeatureSet::with_targets: length mismatch");
    if (!y.allFinite()) throw LinalgError("FeatureSet::with_targets: non-finite targets");
    FeatureSet out = *this;
    out.targets_ = std::move(y);
    return out;
  }

  const Matrix& phi() const { return phi_; }
  const Vector& targets() const { return targets_; }
  const CovMatrix& covariance() const { return covariance_; }
  const SymEig& eig() const { return *eig_; }
  bool normalized() const { return normalized_; }
  Index n() const { return phi_.rows(); }
  Index p() const { return phi_.cols(); }

  /// (1/n) Phi^T y.
  Vector moment() const { return (phi_.transpose() * targets_) / static_cast<double>(n()); }

 private:
  Matrix phi_;
  Vector targets_;
  CovMatrix covariance_;
  std::shared_ptr<const SymEig> eig_;
  bool normalized_ = false;
};

}  // namespace imp
