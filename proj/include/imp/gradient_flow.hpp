#pragma once

// Masked gradient flow on L(w) = (1/2n) ||Phi_A w - y||^2 restricted to the
// active columns Phi_A. The closed form works in the eigenbasis of
// Upsilon = (1/n) Phi_A^T Phi_A; RK4 integration is provided as an
// independent check.

#include "imp/linalg.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace imp {

/// Training time: a positive finite T, or the t -> infinity limit.
class Horizon {
 public:
  static Horizon infinite() { return Horizon(std::numeric_limits<double>::infinity()); }

  static Horizon finite(double t) {
    if (!(t > 0.0) || !std::isfinite(t)) {
      throw std::invalid_argument("Horizon::finite: T must be positive and finite");
    }
    return Horizon(t);
  }

  bool is_infinite() const { return std::isinf(t_); }

  double value() const {
    if (is_infinite()) throw std::logic_error("Horizon::value: horizon is infinite");
    return t_;
  }

  std::string to_string() const {
    if (is_infinite()) return "infinite";
    std::ostringstream os;
    os.precision(17);
    os << t_;
    return os.str();
  }

  friend bool operator==(const Horizon&, const Horizon&) = default;

 private:
  explicit Horizon(double t) : t_(t) {}
  double t_;
};

struct FlowProblem {
  Matrix features_active;  // n x m
  Vector targets;          // n
  Vector w0_active;        // m
  Horizon horizon = Horizon::infinite();

  Index n() const { return features_active.rows(); }
  Index m() const { return features_active.cols(); }

  void validate() const {
    if (m() < 1) throw std::invalid_argument("FlowProblem: at least one active column required");
    if (n() < 1) throw std::invalid_argument("FlowProblem: at least one row required");
    if (targets.size() != n()) {
      throw std::invalid_argument("FlowProblem: targets length " + std::to_string(targets.size()) +
                                  " != row count " + std::to_string(n()));
    }
    if (w0_active.size() != m()) {
      throw std::invalid_argument("FlowProblem: w0 length " + std::to_string(w0_active.size()) +
                                  " != active column count " + std::to_string(m()));
    }
  }

  Matrix gram() const {
    Matrix g = (features_active.transpose() * features_active) / static_cast<double>(n());
    return 0.5 * (g + g.transpose());
  }

  Vector moment() const {
    return (features_active.transpose() * targets) / static_cast<double>(n());
  }
};

struct FlowSolution {
  Vector weights_active;
  bool stationary = false;
  double residual_norm = 0.0;
  std::vector<std::string> diagnostics;
};

/// Mean-squared-error loss (1/2n) ||Phi w - y||^2.
inline double mse_loss(const Matrix& phi, const Vector& y, const Vector& w) {
  return (phi * w - y).squaredNorm() / (2.0 * static_cast<double>(phi.rows()));
}

/// Closed-form flow from the eigendecomposition of Upsilon and the moment
/// (1/n) Phi_A^T y. Per eigen-coordinate with lambda above rank_tol:
///   z(t) = c/lambda + exp(-lambda t) (z0 - c/lambda);
/// otherwise z(t) = z0 (the null-space component is frozen).
inline Vector solve_quadratic_flow(const SymEig& upsilon, const Vector& moment,
                                   const Vector& w0, const Horizon& horizon) {
  const Vector c = upsilon.eigenvectors.transpose() * moment;
  const Vector z0 = upsilon.eigenvectors.transpose() * w0;
  Vector z(upsilon.dim());
  for (Index i = 0; i < upsilon.dim(); ++i) {
    if (upsilon.is_zero(i)) {
      z(i) = z0(i);
      continue;
    }
    const double lambda = upsilon.eigenvalues(i);
    const double target = c(i) / lambda;
    z(i) = horizon.is_infinite()
               ? target
               : target + std::exp(-lambda * horizon.value()) * (z0(i) - target);
  }
  return upsilon.eigenvectors * z;
}

inline FlowSolution flow_closed_form(const FlowProblem& problem,
                                     std::optional<double> rank_tol = std::nullopt) {
  problem.validate();
  const SymEig upsilon = sym_eig(CovMatrix(problem.gram(), problem.n()), rank_tol);
  FlowSolution out;
  out.weights_active =
      solve_quadratic_flow(upsilon, problem.moment(), problem.w0_active, problem.horizon);
  out.stationary = problem.horizon.is_infinite();
  out.residual_norm = (problem.features_active * out.weights_active - problem.targets).norm();
  return out;
}

/// Classical fourth-order Runge-Kutta on w' = -(1/n) Phi_A^T (Phi_A w - y)
/// with `step_count` equal steps over [0, T]. A step larger than
/// 2 / lambda_max is recorded in the diagnostics.
inline FlowSolution flow_rk4(const FlowProblem& problem, long step_count) {
  problem.validate();
  if (problem.horizon.is_infinite()) {
    throw std::invalid_argument("flow_rk4: infinite horizon, use flow_closed_form");
  }
  if (step_count < 1) throw std::invalid_argument("flow_rk4: step_count must be >= 1");

  const Matrix g = problem.gram();
  const Vector b = problem.moment();
  const double h = problem.horizon.value() / static_cast<double>(step_count);

  FlowSolution out;
  const double lambda_max = operator_norm(sym_eig(g));
  if (lambda_max > 0.0 && h > 2.0 / lambda_max) {
    std::ostringstream os;
    os << "flow_rk4: step size " << h << " exceeds 2/lambda_max = " << 2.0 / lambda_max
       << "; integration may be unstable";
    out.diagnostics.push_back(os.str());
  }

  auto rhs = [&](const Vector& w) -> Vector { return b - g * w; };
  Vector w = problem.w0_active;
  for (long s = 0; s < step_count; ++s) {
    const Vector k1 = rhs(w);
    const Vector k2 = rhs(w + 0.5 * h * k1);
    const Vector k3 = rhs(w + 0.5 * h * k2);
    const Vector k4 = rhs(w + h * k3);
    w += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  out.weights_active = std::move(w);
  out.stationary = false;
  out.residual_norm = (problem.features_active * out.weights_active - problem.targets).norm();
  return out;
}

}  // namespace imp
