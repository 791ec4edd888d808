#pragma once

// Batch experiments: support-recovery Monte Carlo, heuristic-equivalence
// sweeps, baseline comparison and the concentration check, plus their file
// outputs. Trial t of a run uses seed base_seed + t and is reproducible from
// (spec, t) alone.

#include "imp/baselines.hpp"
#include "imp/designs.hpp"
#include "imp/imp.hpp"
#include "imp/parallel.hpp"
#include "imp/serialize.hpp"
#include "imp/stats.hpp"
#include "imp/theory.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace imp {

/// Invalid experiment configuration (CLI exit code 2).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A run that cannot proceed under the recovery hypotheses.
class HarnessError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ExperimentKind { SupportRecovery, HeuristicEquivalence, BaselineComparison, Lemma1Check };

inline std::string to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::SupportRecovery: return "support_recovery";
    case ExperimentKind::HeuristicEquivalence: return "heuristic_equivalence";
    case ExperimentKind::BaselineComparison: return "baseline_comparison";
    case ExperimentKind::Lemma1Check: return "lemma1_check";
  }
  return "?";
}

inline ExperimentKind parse_experiment_kind(std::string_view s) {
  if (s == "support_recovery") return ExperimentKind::SupportRecovery;
  if (s == "heuristic_equivalence") return ExperimentKind::HeuristicEquivalence;
  if (s == "baseline_comparison") return ExperimentKind::BaselineComparison;
  if (s == "lemma1_check") return ExperimentKind::Lemma1Check;
  throw ConfigError("unknown experiment kind '" + std::string(s) + "'");
}

struct ImpSettings {
  Horizon horizon = Horizon::infinite();
  std::optional<std::size_t> prune_rounds;  // default p - k
  std::size_t per_round = 1;
  std::optional<double> rank_tol;
  TieBreak tie_break;
};

struct BaselineSettings {
  std::optional<double> tau;  // default gamma / 2
  double eta = 1.0;
  long max_iters = 10000;
  double convergence_tol = 1e-10;
  std::vector<double> sigma_sweep;  // empty means {noise.sigma}
};

struct ExperimentSpec {
  ExperimentKind kind = ExperimentKind::SupportRecovery;
  DesignParams design;  // design.n == 0: derived from the sample-size bound
  SignalParams signal;
  NoiseParams noise;
  ImpSettings imp;
  BaselineSettings baseline;
  double delta = 0.1;
  std::optional<double> epsilon;  // lemma1; default gamma / 2
  double tie_threshold = 1e-9;
  std::size_t trials = 100;
  std::uint64_t base_seed = 0;
  std::string output_dir = "out";
  bool verified_mode = false;
  unsigned threads = 1;

  std::uint64_t trial_seed(std::size_t t) const { return base_seed + t; }

  std::size_t prune_rounds() const {
    return imp.prune_rounds.value_or(static_cast<std::size_t>(design.p - signal.k));
  }

  double tau() const { return baseline.tau.value_or(signal.gamma / 2.0); }
  double lemma1_epsilon() const { return epsilon.value_or(signal.gamma / 2.0); }

  void validate() const {
    auto fail = [](const std::string& m) { throw ConfigError("config: " + m); };
    if (trials < 1) fail("trials must be >= 1");
    if (design.p < 1) fail("design.p must be >= 1");
    if (design.n < 0) fail("design.n must be >= 0");
    if (design.kind == DesignKind::UniformCorr && !(design.alpha > 0.0 && design.alpha < 1.0))
      fail("design.alpha must lie in (0, 1)");
    if (signal.k < 1 || signal.k > design.p) fail("signal.k must satisfy 1 <= k <= p");
    if (!(signal.gamma > 0.0)) fail("signal.gamma must be positive");
    if (!(noise.sigma >= 0.0)) fail("noise.sigma must be >= 0");
    if (!(delta > 0.0 && delta < 1.0)) fail("delta must lie in (0, 1)");
    if (epsilon && !(*epsilon > 0.0)) fail("epsilon must be positive");
    if (!(tie_threshold >= 0.0)) fail("tie_threshold must be >= 0");
    if (imp.per_round < 1) fail("imp.per_round must be >= 1");
    if (imp.rank_tol && *imp.rank_tol < 0.0) fail("imp.rank_tol must be >= 0");
    if (kind == ExperimentKind::SupportRecovery || kind == ExperimentKind::BaselineComparison) {
      if (imp.per_round * (prune_rounds() + 1) > static_cast<std::size_t>(design.p))
        fail("imp.per_round * (prune_rounds + 1) exceeds p");
    }
    if (!(baseline.eta > 0.0)) fail("baseline.eta must be positive");
    if (baseline.tau && !(*baseline.tau >= 0.0)) fail("baseline.tau must be >= 0");
    if (baseline.max_iters < 1) fail("baseline.max_iters must be >= 1");
    for (double s : baseline.sigma_sweep)
      if (!(s >= 0.0)) fail("baseline.sigma_sweep entries must be >= 0");
    if (kind == ExperimentKind::HeuristicEquivalence && design.n < 1)
      fail("heuristic_equivalence requires design.n");
    if (threads < 1) fail("threads must be >= 1");
  }
};

// ---------------------------------------------------------------------------
// Config JSON

namespace detail {

inline void reject_unknown(const Json& obj, std::initializer_list<std::string_view> allowed,
                           const std::string& where) {
  if (!obj.is_object()) throw ConfigError("config: '" + where + "' must be an object");
  for (const auto& [key, value] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError("config: unknown key '" + key + "' in " + where);
    }
  }
}

template <typename T>
void read_if(const Json& obj, const char* key, T& out) {
  if (obj.contains(key) && !obj.at(key).is_null()) out = obj.at(key).get<T>();
}

template <typename T>
void read_opt(const Json& obj, const char* key, std::optional<T>& out) {
  if (obj.contains(key) && !obj.at(key).is_null()) out = obj.at(key).get<T>();
}

inline Horizon horizon_from_json(const Json& j) {
  if (j.is_string()) {
    if (j.get<std::string>() == "infinite") return Horizon::infinite();
    throw ConfigError("config: imp.horizon must be \"infinite\" or a positive number");
  }
  return Horizon::finite(j.get<double>());
}

}  // namespace detail

inline ExperimentSpec spec_from_json(const Json& j, ExperimentSpec spec = {}) {
  using detail::read_if;
  using detail::read_opt;
  try {
    detail::reject_unknown(j,
                           {"kind", "design", "signal", "noise", "imp", "baseline", "delta",
                            "epsilon", "tie_threshold", "trials", "base_seed", "output_dir",
                            "verified_mode", "threads"},
                           "top level");
    if (j.contains("kind")) spec.kind = parse_experiment_kind(j.at("kind").get<std::string>());
    if (j.contains("design")) {
      const Json& d = j.at("design");
      detail::reject_unknown(d, {"kind", "n", "p", "alpha"}, "design");
      if (d.contains("kind")) spec.design.kind = parse_design_kind(d.at("kind").get<std::string>());
      read_if(d, "n", spec.design.n);
      read_if(d, "p", spec.design.p);
      read_if(d, "alpha", spec.design.alpha);
    }
    if (j.contains("signal")) {
      const Json& s = j.at("signal");
      detail::reject_unknown(s, {"k", "gamma", "law"}, "signal");
      read_if(s, "k", spec.signal.k);
      read_if(s, "gamma", spec.signal.gamma);
      if (s.contains("law")) spec.signal.law = parse_amplitude_law(s.at("law").get<std::string>());
    }
    if (j.contains("noise")) {
      const Json& nz = j.at("noise");
      detail::reject_unknown(nz, {"kind", "sigma"}, "noise");
      if (nz.contains("kind")) spec.noise.kind = parse_noise_kind(nz.at("kind").get<std::string>());
      read_if(nz, "sigma", spec.noise.sigma);
    }
    if (j.contains("imp")) {
      const Json& m = j.at("imp");
      detail::reject_unknown(m, {"horizon", "prune_rounds", "per_round", "rank_tol", "tie_break",
                                 "tie_seed"},
                             "imp");
      if (m.contains("horizon")) spec.imp.horizon = detail::horizon_from_json(m.at("horizon"));
      read_opt(m, "prune_rounds", spec.imp.prune_rounds);
      read_if(m, "per_round", spec.imp.per_round);
      read_opt(m, "rank_tol", spec.imp.rank_tol);
      if (m.contains("tie_break")) {
        const auto rule = m.at("tie_break").get<std::string>();
        if (rule == "lowest_index") spec.imp.tie_break.rule = TieBreakRule::LowestIndex;
        else if (rule == "seeded") spec.imp.tie_break.rule = TieBreakRule::Seeded;
        else throw ConfigError("config: unknown imp.tie_break '" + rule + "'");
      }
      read_if(m, "tie_seed", spec.imp.tie_break.seed);
    }
    if (j.contains("baseline")) {
      const Json& b = j.at("baseline");
      detail::reject_unknown(b, {"tau", "eta", "max_iters", "convergence_tol", "sigma_sweep"},
                             "baseline");
      read_opt(b, "tau", spec.baseline.tau);
      read_if(b, "eta", spec.baseline.eta);
      read_if(b, "max_iters", spec.baseline.max_iters);
      read_if(b, "convergence_tol", spec.baseline.convergence_tol);
      read_if(b, "sigma_sweep", spec.baseline.sigma_sweep);
    }
    read_if(j, "delta", spec.delta);
    read_opt(j, "epsilon", spec.epsilon);
    read_if(j, "tie_threshold", spec.tie_threshold);
    read_if(j, "trials", spec.trials);
    read_if(j, "base_seed", spec.base_seed);
    read_if(j, "output_dir", spec.output_dir);
    read_if(j, "verified_mode", spec.verified_mode);
    read_if(j, "threads", spec.threads);
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const DesignError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return spec;
}

inline ExperimentSpec load_spec(const std::filesystem::path& path, ExperimentSpec defaults = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::exception& e) {
    throw ConfigError("config: " + path.string() + ": " + e.what());
  }
  return spec_from_json(j, std::move(defaults));
}

inline Json to_json(const ExperimentSpec& s) {
  auto opt = [](const auto& o) -> Json { return o ? Json(*o) : Json(nullptr); };
  Json horizon = s.imp.horizon.is_infinite() ? Json("infinite") : Json(s.imp.horizon.value());
  return Json{
      {"kind", to_string(s.kind)},
      {"design",
       {{"kind", to_string(s.design.kind)},
        {"n", s.design.n},
        {"p", s.design.p},
        {"alpha", s.design.alpha}}},
      {"signal", {{"k", s.signal.k}, {"gamma", s.signal.gamma}, {"law", to_string(s.signal.law)}}},
      {"noise", {{"kind", to_string(s.noise.kind)}, {"sigma", s.noise.sigma}}},
      {"imp",
       {{"horizon", horizon},
        {"prune_rounds", opt(s.imp.prune_rounds)},
        {"per_round", s.imp.per_round},
        {"rank_tol", opt(s.imp.rank_tol)},
        {"tie_break",
         s.imp.tie_break.rule == TieBreakRule::LowestIndex ? "lowest_index" : "seeded"},
        {"tie_seed", s.imp.tie_break.seed}}},
      {"baseline",
       {{"tau", opt(s.baseline.tau)},
        {"eta", s.baseline.eta},
        {"max_iters", s.baseline.max_iters},
        {"convergence_tol", s.baseline.convergence_tol},
        {"sigma_sweep", s.baseline.sigma_sweep}}},
      {"delta", s.delta},
      {"epsilon", opt(s.epsilon)},
      {"tie_threshold", s.tie_threshold},
      {"trials", s.trials},
      {"base_seed", s.base_seed},
      {"output_dir", s.output_dir},
      {"verified_mode", s.verified_mode},
      {"threads", s.threads}};
}

// ---------------------------------------------------------------------------
// Sample sizes

struct SizedDesign {
  Design design;
  double lambda_min_nz = 0.0;
  double bound_value = 0.0;  // pre-ceiling; 0 when sigma = 0
};

inline double nominal_lambda(const DesignParams& d) {
  return d.kind == DesignKind::UniformCorr ? 1.0 - d.alpha : 1.0;
}

/// Generates the design, choosing n when design.n is 0 as the smallest n >= p
/// found with n >= ceil(bound(lambda_min_nz(Sigma_n))). `bound` maps a
/// smallest non-zero eigenvalue to the pre-ceiling sample size. The search
/// starts from the bound at the nominal spectrum, grows until the condition
/// holds, then bisects back down to the first n that satisfies it.
template <typename BoundFn>
SizedDesign size_design(DesignParams d, std::uint64_t design_seed, BoundFn bound) {
  if (d.n > 0) {
    Design design = make_design(d, design_seed);
    const double lambda = min_nonzero_eig(design.features.eig());
    return {std::move(design), lambda, bound(lambda)};
  }
  auto attempt = [&](Index n) {
    DesignParams dn = d;
    dn.n = n;
    Design design = make_design(dn, design_seed);
    const double lambda = min_nonzero_eig(design.features.eig());
    const double b = bound(lambda);
    return std::make_pair(SizedDesign{std::move(design), lambda, b},
                          static_cast<Index>(std::ceil(b)) <= n);
  };
  constexpr int kMaxIterations = 64;
  Index lo = std::max<Index>(d.p, static_cast<Index>(std::ceil(bound(nominal_lambda(d))))) - 1;
  Index hi = lo + 1;
  auto found = attempt(hi);
  int it = 0;
  while (!found.second) {
    if (++it > kMaxIterations) throw HarnessError("size_design: sample size did not stabilize");
    lo = hi;
    hi = std::max<Index>(hi + 1, static_cast<Index>(std::ceil(found.first.bound_value)));
    found = attempt(hi);
  }
  // hi satisfies; lo failed or is the untested point just below the start.
  while (hi - lo > 1) {
    const Index mid = lo + (hi - lo) / 2;
    auto probe = attempt(mid);
    if (probe.second) {
      hi = mid;
      found = std::move(probe);
    } else {
      lo = mid;
    }
  }
  return std::move(found.first);
}

// ---------------------------------------------------------------------------
// Support recovery

struct TrialRecord {
  std::size_t trial = 0;
  std::uint64_t seed = 0;
  Index n = 0, p = 0, k = 0;
  double gamma = 0.0, sigma = 0.0, delta = 0.0;
  std::size_t q = 0;
  bool sparsity_ok = false;
  bool no_false_exclusion = false;
  double min_nz_eig = 0.0;
  double max_recov_residual = 0.0;
  double wall_ms = 0.0;

  double bound_value = 0.0;
  std::size_t onp_rejections = 0;
  std::size_t zeros = 0;
  std::vector<double> round_min_nz_eig;  // verified mode
  std::vector<double> round_recov_residual;
  std::optional<ImpTrace> trace;
  std::optional<SparseProblem> problem;

  bool success() const { return sparsity_ok && no_false_exclusion; }
};

inline constexpr std::string_view kTrialsCsvHeader =
    "trial,seed,n,p,k,gamma,sigma,delta,q,sparsity_ok,no_false_exclusion,min_nz_eig,"
    "max_recov_residual,wall_ms";

inline std::string csv_row(const TrialRecord& r) {
  char wall[32];
  std::snprintf(wall, sizeof wall, "%.3f", r.wall_ms);
  std::ostringstream os;
  os << r.trial << ',' << r.seed << ',' << r.n << ',' << r.p << ',' << r.k << ','
     << format_double(r.gamma) << ',' << format_double(r.sigma) << ',' << format_double(r.delta)
     << ',' << r.q << ',' << (r.sparsity_ok ? 1 : 0) << ',' << (r.no_false_exclusion ? 1 : 0)
     << ',' << format_double(r.min_nz_eig) << ',' << format_double(r.max_recov_residual) << ','
     << wall;
  return os.str();
}

/// The row without its trailing wall_ms column, which is the only field that
/// is not a function of (spec, trial).
inline std::string deterministic_part(std::string_view row) {
  const auto cut = row.rfind(',');
  return std::string(cut == std::string_view::npos ? row : row.substr(0, cut));
}

inline constexpr double kRecoverabilityTol = 1e-8;
inline constexpr double kOnpTol = 1e-8;
inline constexpr std::size_t kMaxOnpAttempts = 20;

inline double support_bound(const ExperimentSpec& spec, double lambda) {
  if (spec.noise.sigma == 0.0) return 0.0;
  return sample_bound_thm1_value(
      BoundInputs{spec.noise.sigma, spec.signal.gamma, lambda, spec.design.p, spec.delta});
}

inline TrialRecord support_recovery_trial(const ExperimentSpec& spec, std::size_t t) {
  const auto start = std::chrono::steady_clock::now();
  TrialRecord rec;
  rec.trial = t;
  rec.seed = spec.trial_seed(t);
  rec.gamma = spec.signal.gamma;
  rec.sigma = spec.noise.sigma;
  rec.delta = spec.delta;
  rec.q = spec.prune_rounds();

  SizedDesign sized = size_design(spec.design, stream_seed(rec.seed, Stream::Design),
                                  [&](double lambda) { return support_bound(spec, lambda); });
  const FeatureSet& base = sized.design.features;
  rec.n = base.n();
  rec.p = base.p();
  rec.k = spec.signal.k;
  rec.bound_value = sized.bound_value;

  std::optional<SparseProblem> problem;
  for (std::size_t attempt = 0; attempt < kMaxOnpAttempts; ++attempt) {
    const std::uint64_t pseed = attempt == 0 ? rec.seed : derive_seed(rec.seed, 1000 + attempt);
    SparseProblem candidate = problem_on_design(sized.design, spec.signal, spec.noise, pseed);
    if (check_onp(base.eig(), candidate.support, kOnpTol).holds) {
      problem = std::move(candidate);
      break;
    }
    ++rec.onp_rejections;
  }
  if (!problem) {
    throw HarnessError("support recovery: the design fails the orthogonal nullspace property "
                       "for every drawn support (trial " + std::to_string(t) +
                       "); the design is inconsistent with the recovery hypotheses");
  }

  ImpConfig config;
  config.horizon = spec.imp.horizon;
  config.prune_rounds = rec.q;
  config.per_round = spec.imp.per_round;
  config.rank_tol = spec.imp.rank_tol;
  config.tie_break = spec.imp.tie_break;
  config.w_init = Vector::Zero(rec.p);

  RoundObserver observer;
  if (spec.verified_mode) {
    observer = [&](const RoundContext& ctx) {
      const double lambda = ctx.upsilon.rank() > 0 ? min_nonzero_eig(ctx.upsilon)
                                                   : std::numeric_limits<double>::quiet_NaN();
      rec.round_min_nz_eig.push_back(lambda);
      rec.round_recov_residual.push_back(
          check_recoverable(ctx.upsilon, select_entries(problem->signal, ctx.active),
                            kRecoverabilityTol)
              .residual);
    };
  }
  ImpTrace trace = run_imp(problem->features, config, observer);

  const Vector& v = trace.final_weights;
  rec.zeros = static_cast<std::size_t>((v.array() == 0.0).count());
  rec.sparsity_ok = rec.zeros >= rec.q * spec.imp.per_round;
  rec.no_false_exclusion = true;
  for (Index i = 0; i < rec.p; ++i)
    if (std::abs(problem->signal(i)) >= rec.gamma && v(i) == 0.0) rec.no_false_exclusion = false;

  if (spec.verified_mode) {
    rec.min_nz_eig = std::numeric_limits<double>::infinity();
    for (double l : rec.round_min_nz_eig) rec.min_nz_eig = std::min(rec.min_nz_eig, l);
    rec.max_recov_residual = 0.0;
    for (double r : rec.round_recov_residual) rec.max_recov_residual = std::max(rec.max_recov_residual, r);
    rec.trace = std::move(trace);
    rec.problem = std::move(problem);
  } else {
    rec.min_nz_eig = sized.lambda_min_nz;
    rec.max_recov_residual =
        check_recoverable(base.eig(), problem->signal, kRecoverabilityTol).residual;
  }
  rec.wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

struct SupportRecoveryResult {
  McSummary summary;
  std::vector<TrialRecord> records;
  std::size_t onp_rejections = 0;
};

/// The gate: empirical rate of not((i) and (ii)) at most delta.
inline SupportRecoveryResult run_support_recovery(const ExperimentSpec& spec) {
  spec.validate();
  SupportRecoveryResult out;
  out.records.resize(spec.trials);
  parallel_for(spec.trials, spec.threads,
               [&](std::size_t t) { out.records[t] = support_recovery_trial(spec, t); });
  std::size_t failures = 0, sparsity = 0, exclusion = 0;
  for (const TrialRecord& r : out.records) {
    failures += r.success() ? 0 : 1;
    sparsity += r.sparsity_ok ? 0 : 1;
    exclusion += r.no_false_exclusion ? 0 : 1;
    out.onp_rejections += r.onp_rejections;
  }
  const std::size_t draws = spec.trials + out.onp_rejections;
  if (2 * out.onp_rejections > draws) {
    throw HarnessError("support recovery: orthogonal nullspace rejection rate above 50%");
  }
  out.summary = summarize(spec.trials, failures, spec.delta,
                          {{"sparsity", sparsity}, {"false_exclusion", exclusion}});
  return out;
}

/// Recomputes one trial from (spec, trial index).
inline TrialRecord replay_trial(const ExperimentSpec& spec, std::size_t t) {
  spec.validate();
  if (spec.kind != ExperimentKind::SupportRecovery) {
    throw ConfigError("replay: only support_recovery trials are recorded in trials.csv");
  }
  return support_recovery_trial(spec, t);
}

// ---------------------------------------------------------------------------
// Heuristic equivalence

struct HeuristicTrial {
  std::size_t trial = 0;
  std::uint64_t seed = 0;
  Index n = 0, p = 0;
  double delta_pw = 0.0;
  double min_gap = 0.0;        // smallest adjacent gap of sorted |phi_j^T y| / n
  double first_gap = 0.0;      // gap between the two smallest scores, / n
  double gap_threshold = 0.0;  // 10 p delta_pw max_j |phi_j^T y| / n (incoherent only)
  double inverse_defect = 0.0; // ||Sigma Sigma^{-1} - I||_max
  std::size_t attempts = 1;
  bool degenerate = false;
  bool gap_unmet = false;
  bool first_match = false;
  std::optional<bool> full_match;
};

struct HeuristicReport {
  DesignKind design = DesignKind::Orthonormal;
  std::string metric;  // "full_order" or "first_prune"
  std::size_t trials = 0;
  std::size_t degenerate = 0;
  std::size_t gap_unmet = 0;
  std::size_t evaluated = 0;
  std::size_t full_matches = 0;
  std::size_t first_matches = 0;
  double match_rate = 0.0;
  double max_inverse_defect = 0.0;
  bool pass = false;
  std::vector<HeuristicTrial> rows;
};

inline constexpr std::size_t kMaxGapAttempts = 1000;

inline HeuristicTrial heuristic_trial(const ExperimentSpec& spec, std::size_t t) {
  HeuristicTrial row;
  row.trial = t;
  row.seed = spec.trial_seed(t);
  const Design design = make_design(spec.design, stream_seed(row.seed, Stream::Design));
  const FeatureSet& base = design.features;
  row.n = base.n();
  row.p = base.p();
  row.delta_pw = design.delta_pw;
  {
    const Matrix& s = base.covariance().entries();
    const Matrix inv = s.partialPivLu().solve(Matrix::Identity(row.p, row.p));
    row.inverse_defect = max_abs(s * inv - Matrix::Identity(row.p, row.p));
  }
  const bool incoherent = spec.design.kind == DesignKind::Incoherent;
  const double inv_n = 1.0 / static_cast<double>(row.n);

  std::optional<FeatureSet> features;
  for (std::size_t attempt = 0; attempt < (incoherent ? kMaxGapAttempts : 1); ++attempt) {
    row.attempts = attempt + 1;
    const std::uint64_t pseed = attempt == 0 ? row.seed : derive_seed(row.seed, 1000 + attempt);
    FeatureSet candidate = problem_on_design(design, spec.signal, spec.noise, pseed).features;
    Vector scores = alignment_scores(candidate) * inv_n;
    std::sort(scores.begin(), scores.end());
    const double max_score = scores(row.p - 1);
    row.min_gap = std::numeric_limits<double>::infinity();
    for (Index i = 1; i < row.p; ++i) row.min_gap = std::min(row.min_gap, scores(i) - scores(i - 1));
    row.first_gap = row.p > 1 ? scores(1) - scores(0) : std::numeric_limits<double>::infinity();
    if (row.p == 1) row.min_gap = 0.0;
    row.degenerate = row.p > 1 && row.min_gap <= spec.tie_threshold * max_score;
    if (incoherent) {
      row.gap_threshold = 10.0 * static_cast<double>(row.p) * row.delta_pw * max_score;
      if (!(row.first_gap > row.gap_threshold)) continue;
    }
    features = std::move(candidate);
    break;
  }
  if (!features) {
    row.gap_unmet = true;
    return row;
  }

  const std::vector<Index> aligned = alignment_order(*features);
  ImpConfig config;
  config.horizon = spec.imp.horizon;
  config.w_init = Vector::Zero(row.p);
  config.rank_tol = spec.imp.rank_tol;
  config.tie_break = spec.imp.tie_break;
  if (incoherent) {
    config.prune_rounds = 0;
    const ImpTrace trace = run_imp(*features, config);
    row.first_match = trace.rounds.front().pruned.front() == aligned.front();
  } else {
    const std::vector<Index> order = imp_prune_order(*features, config);
    row.full_match = order == aligned;
    row.first_match = order.front() == aligned.front();
  }
  return row;
}

/// Full-order match for orthonormal and uniform-correlation designs; first
/// prune match under the enforced gap condition for incoherent designs.
/// Degenerate and gap-unmet trials are excluded from the rate.
inline HeuristicReport run_heuristic_equivalence(const ExperimentSpec& spec) {
  spec.validate();
  HeuristicReport rep;
  rep.design = spec.design.kind;
  rep.metric = spec.design.kind == DesignKind::Incoherent ? "first_prune" : "full_order";
  rep.trials = spec.trials;
  rep.rows.resize(spec.trials);
  parallel_for(spec.trials, spec.threads,
               [&](std::size_t t) { rep.rows[t] = heuristic_trial(spec, t); });
  for (const HeuristicTrial& r : rep.rows) {
    rep.max_inverse_defect = std::max(rep.max_inverse_defect, r.inverse_defect);
    if (r.gap_unmet) {
      ++rep.gap_unmet;
      continue;
    }
    if (r.degenerate) {
      ++rep.degenerate;
      continue;
    }
    ++rep.evaluated;
    rep.first_matches += r.first_match ? 1 : 0;
    rep.full_matches += r.full_match.value_or(false) ? 1 : 0;
  }
  const std::size_t hits = rep.metric == "first_prune" ? rep.first_matches : rep.full_matches;
  rep.match_rate = rep.evaluated == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(rep.evaluated);
  rep.pass = rep.evaluated > 0 && hits == rep.evaluated;
  return rep;
}

// ---------------------------------------------------------------------------
// Baseline comparison

enum class Method { Imp, HardThreshold, Iht };

inline std::string to_string(Method m) {
  switch (m) {
    case Method::Imp: return "imp";
    case Method::HardThreshold: return "ht";
    case Method::Iht: return "iht";
  }
  return "?";
}

struct BaselineCell {
  double sigma = 0.0;
  Method method = Method::Imp;
  std::size_t trials = 0;
  std::size_t exact = 0;
  double f1_sum = 0.0;
  double support_size_sum = 0.0;
  std::size_t diverged = 0;
  std::size_t sparsity_violations = 0;  // imp only

  double exact_rate() const { return trials == 0 ? 0.0 : static_cast<double>(exact) / static_cast<double>(trials); }
  double mean_f1() const { return trials == 0 ? 0.0 : f1_sum / static_cast<double>(trials); }
  double mean_support_size() const {
    return trials == 0 ? 0.0 : support_size_sum / static_cast<double>(trials);
  }
};

struct BaselineOutcome {
  SupportScore score;
  std::size_t support_size = 0;
  bool diverged = false;
  bool sparsity_ok = true;
};

struct BaselineReport {
  std::vector<BaselineCell> cells;  // ordered by (sigma, method)
};

inline std::vector<BaselineOutcome> baseline_trial(const ExperimentSpec& spec, double sigma,
                                                   std::size_t t) {
  const std::uint64_t seed = spec.trial_seed(t);
  NoiseParams noise = spec.noise;
  noise.sigma = sigma;
  ExperimentSpec sized_spec = spec;
  sized_spec.noise.sigma = sigma;
  SizedDesign sized = size_design(spec.design, stream_seed(seed, Stream::Design),
                                  [&](double l) { return support_bound(sized_spec, l); });
  const SparseProblem problem = problem_on_design(sized.design, spec.signal, noise, seed);
  const Index p = problem.features.p();

  std::vector<BaselineOutcome> out(3);
  ImpConfig config;
  config.horizon = spec.imp.horizon;
  config.prune_rounds = spec.prune_rounds();
  config.per_round = spec.imp.per_round;
  config.rank_tol = spec.imp.rank_tol;
  config.tie_break = spec.imp.tie_break;
  config.w_init = Vector::Zero(p);
  const Vector v = run_imp(problem.features, config).final_weights;
  const auto imp_support = support_of(v);
  out[0] = {score_support(imp_support, problem.support), imp_support.size(), false,
            static_cast<std::size_t>(p) - imp_support.size() >= config.prune_rounds * config.per_round};

  const auto ht_support = support_of(ht_estimator(problem.features, spec.tau()));
  out[1] = {score_support(ht_support, problem.support), ht_support.size(), false, true};

  ThresholdConfig tc;
  tc.tau = spec.tau();
  tc.eta = spec.baseline.eta;
  tc.max_iters = spec.baseline.max_iters;
  tc.convergence_tol = spec.baseline.convergence_tol;
  try {
    const auto iht_support = support_of(iht(problem.features, tc).estimate);
    out[2] = {score_support(iht_support, problem.support), iht_support.size(), false, true};
  } catch (const IhtDivergence&) {
    out[2] = {SupportScore{false, 0.0}, 0, true, true};
  }
  return out;
}

inline BaselineReport run_baseline_comparison(const ExperimentSpec& spec) {
  spec.validate();
  std::vector<double> sweep = spec.baseline.sigma_sweep;
  if (sweep.empty()) sweep.push_back(spec.noise.sigma);
  BaselineReport rep;
  for (double sigma : sweep) {
    std::vector<std::vector<BaselineOutcome>> per_trial(spec.trials);
    parallel_for(spec.trials, spec.threads,
                 [&](std::size_t t) { per_trial[t] = baseline_trial(spec, sigma, t); });
    for (Method m : {Method::Imp, Method::HardThreshold, Method::Iht}) {
      BaselineCell cell;
      cell.sigma = sigma;
      cell.method = m;
      for (const auto& outcomes : per_trial) {
        const BaselineOutcome& o = outcomes[static_cast<std::size_t>(m)];
        ++cell.trials;
        cell.exact += o.score.exact ? 1 : 0;
        cell.f1_sum += o.score.f1;
        cell.support_size_sum += static_cast<double>(o.support_size);
        cell.diverged += o.diverged ? 1 : 0;
        cell.sparsity_violations += o.sparsity_ok ? 0 : 1;
      }
      rep.cells.push_back(cell);
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Concentration check

struct Lemma1Result {
  McSummary summary;
  Index n = 0;
  double bound_value = 0.0;
  double lambda_min_nz = 0.0;
  double epsilon = 0.0;
};

/// Generates one design at the concentration sample size (unless design.n is
/// set) and estimates the exceedance probability over `trials` noise draws.
inline Lemma1Result run_lemma1_check(const ExperimentSpec& spec) {
  spec.validate();
  Lemma1Result out;
  out.epsilon = spec.lemma1_epsilon();
  auto bound = [&](double lambda) {
    if (spec.noise.sigma == 0.0) return 0.0;
    return sample_bound_lemma1_value(
        BoundInputs{spec.noise.sigma, out.epsilon, lambda, spec.design.p, spec.delta});
  };
  SizedDesign sized = size_design(spec.design, stream_seed(spec.base_seed, Stream::Design), bound);
  out.n = sized.design.features.n();
  out.bound_value = sized.bound_value;
  out.lambda_min_nz = sized.lambda_min_nz;
  out.summary = lemma1_mc(sized.design.features, spec.noise, out.epsilon, spec.trials,
                          stream_seed(spec.base_seed, Stream::Noise), spec.delta, spec.threads);
  return out;
}

// ---------------------------------------------------------------------------
// Output files

namespace detail {

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

}  // namespace detail

inline std::string trials_csv(const std::vector<TrialRecord>& records) {
  std::string s(kTrialsCsvHeader);
  s += '\n';
  for (const TrialRecord& r : records) {
    s += csv_row(r);
    s += '\n';
  }
  return s;
}

inline void write_support_recovery(const std::filesystem::path& dir, const ExperimentSpec& spec,
                                   const SupportRecoveryResult& res) {
  std::filesystem::create_directories(dir);
  Json summary = to_json(res.summary);
  summary["experiment"] = to_string(spec.kind);
  summary["onp_rejections"] = res.onp_rejections;
  summary["ci95_upper_below_budget"] = res.summary.ci.upper <= spec.delta;
  detail::write_text(dir / "summary.json", summary.dump(2) + "\n");
  detail::write_text(dir / "trials.csv", trials_csv(res.records));
  detail::write_text(dir / "config.json", to_json(spec).dump(2) + "\n");
  if (spec.verified_mode) {
    std::filesystem::create_directories(dir / "trace");
    for (const TrialRecord& r : res.records) {
      Json j = to_json(*r.trace);
      j["trial"] = r.trial;
      j["seed"] = r.seed;
      j["round_min_nz_eig"] = r.round_min_nz_eig;
      j["round_recov_residual"] = r.round_recov_residual;
      j["problem"] = to_json(*r.problem);
      detail::write_text(dir / "trace" / (std::to_string(r.trial) + ".json"), j.dump() + "\n");
    }
  }
}

inline void write_heuristic(const std::filesystem::path& dir, const ExperimentSpec& spec,
                            const HeuristicReport& rep) {
  std::filesystem::create_directories(dir);
  Json summary{{"experiment", to_string(spec.kind)},
               {"design", to_string(rep.design)},
               {"metric", rep.metric},
               {"trials", rep.trials},
               {"evaluated", rep.evaluated},
               {"degenerate", rep.degenerate},
               {"gap_unmet", rep.gap_unmet},
               {"full_matches", rep.full_matches},
               {"first_matches", rep.first_matches},
               {"match_rate", rep.match_rate},
               {"max_inverse_defect", rep.max_inverse_defect},
               {"pass", rep.pass}};
  detail::write_text(dir / "summary.json", summary.dump(2) + "\n");
  std::ostringstream csv;
  csv << "trial,seed,n,p,delta_pw,min_gap,first_gap,gap_threshold,inverse_defect,attempts,"
         "degenerate,gap_unmet,first_match,full_match\n";
  for (const HeuristicTrial& r : rep.rows) {
    csv << r.trial << ',' << r.seed << ',' << r.n << ',' << r.p << ',' << format_double(r.delta_pw)
        << ',' << format_double(r.min_gap) << ',' << format_double(r.first_gap) << ','
        << format_double(r.gap_threshold) << ',' << format_double(r.inverse_defect) << ','
        << r.attempts << ',' << r.degenerate << ',' << r.gap_unmet << ',' << r.first_match << ','
        << (r.full_match ? std::to_string(*r.full_match) : "") << '\n';
  }
  detail::write_text(dir / "heuristic.csv", csv.str());
  detail::write_text(dir / "config.json", to_json(spec).dump(2) + "\n");
}

inline void write_baselines(const std::filesystem::path& dir, const ExperimentSpec& spec,
                            const BaselineReport& rep) {
  std::filesystem::create_directories(dir);
  std::ostringstream csv;
  csv << "sigma,method,trials,exact_rate,mean_f1,mean_support_size,diverged\n";
  Json cells = Json::array();
  for (const BaselineCell& c : rep.cells) {
    csv << format_double(c.sigma) << ',' << to_string(c.method) << ',' << c.trials << ','
        << format_double(c.exact_rate()) << ',' << format_double(c.mean_f1()) << ','
        << format_double(c.mean_support_size()) << ',' << c.diverged << '\n';
    cells.push_back(Json{{"sigma", c.sigma},
                         {"method", to_string(c.method)},
                         {"trials", c.trials},
                         {"exact_rate", c.exact_rate()},
                         {"mean_f1", c.mean_f1()},
                         {"diverged", c.diverged},
                         {"sparsity_violations", c.sparsity_violations}});
  }
  detail::write_text(dir / "baselines.csv", csv.str());
  detail::write_text(dir / "summary.json",
                     Json{{"experiment", to_string(spec.kind)}, {"cells", cells}}.dump(2) + "\n");
  detail::write_text(dir / "config.json", to_json(spec).dump(2) + "\n");
}

inline void write_lemma1(const std::filesystem::path& dir, const ExperimentSpec& spec,
                         const Lemma1Result& res) {
  std::filesystem::create_directories(dir);
  Json summary = to_json(res.summary);
  summary["experiment"] = to_string(spec.kind);
  summary["n"] = res.n;
  summary["bound_value"] = res.bound_value;
  summary["lambda_min_nz"] = res.lambda_min_nz;
  summary["epsilon"] = res.epsilon;
  detail::write_text(dir / "summary.json", summary.dump(2) + "\n");
  detail::write_text(dir / "config.json", to_json(spec).dump(2) + "\n");
}

}  // namespace imp
