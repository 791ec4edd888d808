// imp-harness: command-line front end for the IMP experiments.
//
// Exit codes: 0 pass, 1 acceptance gate failed, 2 configuration error,
// 3 unexpected internal error.

#include "imp/harness.hpp"

#include "CLI11.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace {

constexpr int kExitPass = 0;
constexpr int kExitGateFail = 1;
constexpr int kExitConfig = 2;
constexpr int kExitInternal = 3;

struct GlobalOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> trials;
  std::optional<std::string> out;
  std::optional<unsigned> threads;
  bool verified = false;
};

imp::ExperimentSpec defaults_for(imp::ExperimentKind kind) {
  imp::ExperimentSpec s;
  s.kind = kind;
  s.design = {imp::DesignKind::Orthonormal, 0, 50, 0.1};
  s.signal = {5, 0.5, imp::AmplitudeLaw::Rademacher};
  s.noise = {imp::NoiseKind::Gaussian, 1.0};
  s.delta = 0.1;
  s.trials = 100;
  if (kind == imp::ExperimentKind::HeuristicEquivalence) {
    s.design = {imp::DesignKind::Orthonormal, 64, 16, 0.1};
    s.signal = {8, 1.0, imp::AmplitudeLaw::Rademacher};
  }
  return s;
}

imp::ExperimentSpec resolve_spec(const GlobalOptions& g, imp::ExperimentKind kind) {
  imp::ExperimentSpec spec = defaults_for(kind);
  if (!g.config.empty()) {
    spec = imp::load_spec(g.config, spec);
    if (spec.kind != kind) {
      throw imp::ConfigError("config kind '" + imp::to_string(spec.kind) +
                             "' does not match the subcommand ('" + imp::to_string(kind) + "')");
    }
  }
  if (g.seed) spec.base_seed = *g.seed;
  if (g.trials) spec.trials = *g.trials;
  if (g.out) spec.output_dir = *g.out;
  if (g.threads) spec.threads = *g.threads;
  if (g.verified) spec.verified_mode = true;
  spec.validate();
  return spec;
}

void print_summary(const imp::McSummary& s, const char* label) {
  std::cout << label << ": " << s.failures << "/" << s.trials << " failures, rate "
            << s.failure_rate << " (95% CI [" << s.ci.lower << ", " << s.ci.upper
            << "]), budget " << s.budget << " -> " << (s.pass ? "PASS" : "FAIL") << "\n";
}

std::optional<std::string> find_csv_row(const std::filesystem::path& csv, std::size_t trial) {
  std::ifstream in(csv);
  if (!in) throw imp::ConfigError("replay: cannot open " + csv.string());
  std::string line;
  std::getline(in, line);
  if (line != imp::kTrialsCsvHeader) throw imp::ConfigError("replay: unexpected trials.csv header");
  const std::string prefix = std::to_string(trial) + ",";
  while (std::getline(in, line)) {
    if (line.rfind(prefix, 0) == 0) return line;
  }
  return std::nullopt;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Iterative magnitude pruning experiments for linear models"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions g;
  app.add_option("--config", g.config, "JSON experiment configuration");
  app.add_option("--seed", g.seed, "Base seed (trial t uses seed + t)");
  app.add_option("--trials", g.trials, "Number of trials")->check(CLI::PositiveNumber);
  app.add_option("--out", g.out, "Output directory");
  app.add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber);
  app.add_flag("--verified", g.verified, "Record per-round recoverability and write traces");

  auto* recover = app.add_subcommand("recover", "Support-recovery Monte Carlo");
  auto* heuristic = app.add_subcommand("heuristic", "IMP order vs the alignment heuristic");
  auto* baselines = app.add_subcommand("baselines", "IMP vs hard thresholding and IHT");
  auto* lemma1 = app.add_subcommand("lemma1", "Noise-functional concentration check");
  auto* replay = app.add_subcommand("replay", "Recompute one support-recovery trial");

  std::size_t replay_trial = 0;
  std::string replay_check;
  replay->add_option("--trial", replay_trial, "Trial index")->required();
  replay->add_option("--check", replay_check, "trials.csv to compare against");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitPass : kExitConfig;
  }

  try {
    if (recover->parsed()) {
      const auto spec = resolve_spec(g, imp::ExperimentKind::SupportRecovery);
      const auto res = imp::run_support_recovery(spec);
      imp::write_support_recovery(spec.output_dir, spec, res);
      print_summary(res.summary, "support recovery");
      return res.summary.pass ? kExitPass : kExitGateFail;
    }
    if (heuristic->parsed()) {
      const auto spec = resolve_spec(g, imp::ExperimentKind::HeuristicEquivalence);
      const auto rep = imp::run_heuristic_equivalence(spec);
      imp::write_heuristic(spec.output_dir, spec, rep);
      std::cout << "heuristic equivalence (" << imp::to_string(rep.design) << ", " << rep.metric
                << "): match rate " << rep.match_rate << " on " << rep.evaluated
                << " trials, degenerate " << rep.degenerate << ", gap unmet " << rep.gap_unmet
                << " -> " << (rep.pass ? "PASS" : "FAIL") << "\n";
      return rep.pass ? kExitPass : kExitGateFail;
    }
    if (baselines->parsed()) {
      const auto spec = resolve_spec(g, imp::ExperimentKind::BaselineComparison);
      const auto rep = imp::run_baseline_comparison(spec);
      imp::write_baselines(spec.output_dir, spec, rep);
      for (const auto& c : rep.cells) {
        std::cout << "sigma " << c.sigma << " " << imp::to_string(c.method) << ": exact "
                  << c.exact_rate() << ", F1 " << c.mean_f1() << "\n";
      }
      return kExitPass;
    }
    if (lemma1->parsed()) {
      const auto spec = resolve_spec(g, imp::ExperimentKind::Lemma1Check);
      const auto res = imp::run_lemma1_check(spec);
      imp::write_lemma1(spec.output_dir, spec, res);
      std::cout << "n = " << res.n << ", epsilon = " << res.epsilon << "\n";
      print_summary(res.summary, "concentration");
      return res.summary.pass ? kExitPass : kExitGateFail;
    }
    if (replay->parsed()) {
      const auto spec = resolve_spec(g, imp::ExperimentKind::SupportRecovery);
      const auto rec = imp::replay_trial(spec, replay_trial);
      const std::string row = imp::csv_row(rec);
      std::cout << row << "\n";
      if (!replay_check.empty()) {
        const auto stored = find_csv_row(replay_check, replay_trial);
        if (!stored) throw imp::ConfigError("replay: trial not present in " + replay_check);
        const bool same = imp::deterministic_part(*stored) == imp::deterministic_part(row);
        std::cout << (same ? "MATCH" : "MISMATCH") << "\n";
        return same ? kExitPass : kExitGateFail;
      }
      return kExitPass;
    }
  } catch (const imp::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const imp::HarnessError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitConfig;
}
