#pragma once

// Iterative magnitude pruning for linear models trained by gradient flow.
//
// Round k = 0..q: reset the active weights to w_init, train to the horizon,
// record the trained vector, then prune the smallest-magnitude active
// weight(s). The returned weights are those of round q, i.e. trained under a
// mask with q * per_round coordinates pruned; the trace also keeps the final
// round's prune event.

#include "imp/feature_set.hpp"
#include "imp/gradient_flow.hpp"
#include "imp/rng.hpp"

#include <algorithm>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

namespace imp {

/// Diagonal 0/1 mask with the chronological prune history. Indices are
/// 0-based.
class PruneMask {
 public:
  explicit PruneMask(Index p) : active_(static_cast<std::size_t>(p), true) {
    if (p < 1) throw std::invalid_argument("PruneMask: dimension must be positive");
  }

  Index dim() const { return static_cast<Index>(active_.size()); }
  bool is_active(Index i) const { return active_.at(static_cast<std::size_t>(i)); }
  Index active_count() const { return dim() - static_cast<Index>(prune_order_.size()); }
  const std::vector<Index>& prune_order() const { return prune_order_; }
  const std::vector<bool>& active() const { return active_; }

  std::vector<Index> active_indices() const {
    std::vector<Index> out;
    out.reserve(static_cast<std::size_t>(active_count()));
    for (Index i = 0; i < dim(); ++i)
      if (active_[static_cast<std::size_t>(i)]) out.push_back(i);
    return out;
  }

  void prune(Index i) {
    if (i < 0 || i >= dim()) throw std::out_of_range("PruneMask::prune: index out of range");
    if (!active_[static_cast<std::size_t>(i)]) {
      throw std::logic_error("PruneMask::prune: index " + std::to_string(i) + " already pruned");
    }
    active_[static_cast<std::size_t>(i)] = false;
    prune_order_.push_back(i);
  }

  friend bool operator==(const PruneMask&, const PruneMask&) = default;

 private:
  std::vector<bool> active_;
  std::vector<Index> prune_order_;
};

enum class TieBreakRule { LowestIndex, Seeded };

/// How equal magnitudes at the argmin are ordered. Seeded breaks ties with a
/// per-round pseudo-random key so randomized studies stay reproducible.
struct TieBreak {
  TieBreakRule rule = TieBreakRule::LowestIndex;
  std::uint64_t seed = 0;

  static TieBreak lowest_index() { return {}; }
  static TieBreak seeded(std::uint64_t s) { return {TieBreakRule::Seeded, s}; }

  std::uint64_t key(std::size_t round, Index i) const {
    if (rule == TieBreakRule::LowestIndex) return static_cast<std::uint64_t>(i);
    return mix64(derive_seed(seed, round) ^ static_cast<std::uint64_t>(i));
  }

  friend bool operator==(const TieBreak&, const TieBreak&) = default;
};

struct ImpConfig {
  Horizon horizon = Horizon::infinite();
  std::size_t prune_rounds = 0;  // q
  Vector w_init;
  std::size_t per_round = 1;
  std::optional<double> rank_tol;
  TieBreak tie_break;

  void validate(Index p) const {
    if (w_init.size() != p) {
      throw std::invalid_argument("ImpConfig: w_init length " + std::to_string(w_init.size()) +
                                  " != feature count " + std::to_string(p));
    }
    if (per_round < 1) throw std::invalid_argument("ImpConfig: per_round must be >= 1");
    if (per_round * (prune_rounds + 1) > static_cast<std::size_t>(p)) {
      throw std::invalid_argument("ImpConfig: per_round * (prune_rounds + 1) = " +
                                  std::to_string(per_round * (prune_rounds + 1)) +
                                  " exceeds feature count " + std::to_string(p));
    }
    if (rank_tol && *rank_tol < 0.0) throw std::invalid_argument("ImpConfig: rank_tol < 0");
    if (!w_init.allFinite()) throw std::invalid_argument("ImpConfig: non-finite w_init");
  }
};

struct ImpRound {
  PruneMask mask;                        // before this round's prune
  Vector weights;                        // length p, zero off the mask
  std::vector<Index> pruned;             // this round
  std::vector<double> pruned_magnitudes;
};

struct ImpTrace {
  std::vector<ImpRound> rounds;
  Vector final_weights;
  PruneMask final_mask{1};  // after every prune event

  const std::vector<Index>& prune_order() const { return final_mask.prune_order(); }
};

/// What an observer sees each round, after training and before pruning.
struct RoundContext {
  std::size_t round;
  const std::vector<Index>& active;
  const Vector& w0_active;
  const SymEig& upsilon;
  const Vector& trained_active;
};

using RoundObserver = std::function<void(const RoundContext&)>;

inline ImpTrace run_imp(const FeatureSet& features, const ImpConfig& config,
                        const RoundObserver& observer = {}) {
  const Index p = features.p();
  config.validate(p);

  const Vector moment = features.moment();
  PruneMask mask(p);
  ImpTrace trace;
  trace.rounds.reserve(config.prune_rounds + 1);

  for (std::size_t k = 0; k <= config.prune_rounds; ++k) {
    const std::vector<Index> active = mask.active_indices();
    const CovMatrix upsilon_cov = features.covariance().restrict_to(active);
    const SymEig upsilon = sym_eig(upsilon_cov, config.rank_tol);
    const Vector w0 = select_entries(config.w_init, active);
    const Vector trained =
        solve_quadratic_flow(upsilon, select_entries(moment, active), w0, config.horizon);

    if (observer) observer(RoundContext{k, active, w0, upsilon, trained});

    ImpRound round{mask, Vector::Zero(p), {}, {}};
    for (std::size_t a = 0; a < active.size(); ++a) round.weights(active[a]) = trained(static_cast<Index>(a));

    std::vector<std::size_t> order(active.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto sort_key = [&](std::size_t a) {
      return std::make_tuple(std::abs(trained(static_cast<Index>(a))),
                             config.tie_break.key(k, active[a]));
    };
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(config.per_round),
                      order.end(),
                      [&](std::size_t a, std::size_t b) { return sort_key(a) < sort_key(b); });
    for (std::size_t r = 0; r < config.per_round; ++r) {
      const Index idx = active[order[r]];
      round.pruned.push_back(idx);
      round.pruned_magnitudes.push_back(std::abs(trained(static_cast<Index>(order[r]))));
      mask.prune(idx);
    }
    trace.rounds.push_back(std::move(round));
  }

  trace.final_weights = trace.rounds.back().weights;
  trace.final_mask = mask;
  return trace;
}

/// Full chronological pruning ranking: runs with q = p - 1 and one prune per
/// round, ignoring `config.prune_rounds` and `config.per_round`.
inline std::vector<Index> imp_prune_order(const FeatureSet& features, ImpConfig config) {
  config.prune_rounds = static_cast<std::size_t>(features.p() - 1);
  config.per_round = 1;
  return run_imp(features, config).prune_order();
}

}  // namespace imp
