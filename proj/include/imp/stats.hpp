#pragma once

#include <boost/math/distributions/beta.hpp>

#include <cstddef>
#include <map>
#include <stdexcept>
#include <string>

namespace imp {

struct BinomialInterval {
  double lower = 0.0;
  double upper = 1.0;
};

/// Exact (Clopper-Pearson) two-sided interval for `failures` out of `trials`.
inline BinomialInterval clopper_pearson(std::size_t failures, std::size_t trials,
                                        double confidence = 0.95) {
  if (trials == 0) throw std::invalid_argument("clopper_pearson: trials must be positive");
  if (failures > trials) throw std::invalid_argument("clopper_pearson: failures > trials");
  const double alpha = 1.0 - confidence;
  const auto x = static_cast<double>(failures);
  const auto n = static_cast<double>(trials);
  BinomialInterval ci;
  if (failures > 0) {
    ci.lower = boost::math::quantile(boost::math::beta_distribution<>(x, n - x + 1.0), alpha / 2);
  }
  if (failures < trials) {
    ci.upper =
        boost::math::quantile(boost::math::beta_distribution<>(x + 1.0, n - x), 1.0 - alpha / 2);
  }
  return ci;
}

/// Aggregate of a Monte Carlo run. `failures` counts the gated criterion;
/// `failure_counts` breaks failures down per named criterion.
struct McSummary {
  std::size_t trials = 0;
  std::map<std::string, std::size_t> failure_counts;
  std::size_t failures = 0;
  double failure_rate = 0.0;
  BinomialInterval ci;
  double budget = 0.0;
  bool pass = false;
};

inline McSummary summarize(std::size_t trials, std::size_t failures, double budget,
                           std::map<std::string, std::size_t> per_criterion = {}) {
  McSummary s;
  s.trials = trials;
  s.failures = failures;
  s.failure_counts = std::move(per_criterion);
  s.failure_rate = static_cast<double>(failures) / static_cast<double>(trials);
  s.ci = clopper_pearson(failures, trials);
  s.budget = budget;
  s.pass = s.failure_rate <= budget;
  return s;
}

}  // namespace imp
