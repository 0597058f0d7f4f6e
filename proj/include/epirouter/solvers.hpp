#pragma once

#include <functional>
#include <map>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "epirouter/router.hpp"
#include "epirouter/universe.hpp"

namespace epirouter {

// Physical constants (CODATA 2018) used by the atom solvers.
inline constexpr double kBohrRadiusM = 5.29177210903e-11;
inline constexpr double kClassicalElectronRadiusM = 2.8179403262e-15;
inline constexpr double kSpeedOfLightMS = 299792458.0;
inline constexpr double kHydrogenGroundStateEv = 13.6057;

// Weights at or below this threshold count as "not participating" when
// judging whether incompatible universes are being mixed.
inline constexpr double kWeightEpsilon = 1e-12;

struct Claim {
  std::string name;
  double value = 0.0;
  std::string units;  // empty for dimensionless
};

// Answer from one universe's solver. validity_domain records the axiom set
// the numbers are meaningful under; direct solver calls always set it to the
// solver's own universe.
struct SolverOutput {
  UniverseId universe;
  std::vector<Claim> claims;
  std::string verdict;
  UniverseId validity_domain;
};

// Symmetric, irreflexive "cannot be coherently mixed" relation.
class IncompatibilityRegistry {
 public:
  // Marks the frequentist/Bayesian and classical/quantum pairs.
  static IncompatibilityRegistry standard();

  void mark_incompatible(const UniverseId& a, const UniverseId& b);
  bool incompatible(const UniverseId& a, const UniverseId& b) const;

 private:
  std::set<std::pair<std::string, std::string>> pairs_;  // ordered symbols
};

struct MixingVerdict {
  bool consistent = true;
  std::string reason;
  // Universes carrying weight above kWeightEpsilon, with their weights.
  std::vector<std::pair<UniverseId, double>> participants;
};

// A weight assignment over universes is consistent iff no two universes that
// both carry weight above kWeightEpsilon are marked incompatible. Weights
// must be nonnegative and sum to 1 (1e-9 tolerance). Verdict does not depend
// on the enumeration order of `weights`.
MixingVerdict check_mixing(
    std::span<const std::pair<UniverseId, double>> weights,
    const IncompatibilityRegistry& reg);

// --- Per-universe solvers ---------------------------------------------------

// Two-sided z-test of fair-coin H0: p = 1/2.
SolverOutput solve_freq_coin(long n, long heads, double alpha);

// Beta-Binomial update; reports P(theta > threshold | data).
SolverOutput solve_bayes_coin(long n, long heads, double prior_a,
                              double prior_b, double threshold);

// Conjugate Normal-Normal update with known likelihood variance; reports the
// posterior and a central 95% credible interval.
SolverOutput solve_bayes_normal(double prior_mean, double prior_var,
                                std::span<const double> obs, double lik_var);

// Known-sigma Gaussian MLE with a two-sided confidence interval.
SolverOutput solve_freq_normal_mle(std::span<const double> obs, double sigma,
                                   double conf);

// Radiative collapse time of an orbiting classical electron starting at
// initial_radius: t = r^3 / (4 re^2 c).
SolverOutput solve_classical_atom(double initial_radius = kBohrRadiusM);

// Bound-state energy E_n of hydrogen, n >= 1.
SolverOutput solve_quantum_atom(long level);

// --- Dispatch ----------------------------------------------------------------

struct CoinTestProblem {
  long n = 0;
  long heads = 0;
  double alpha = 0.05;
};

struct CoinPosteriorProblem {
  long n = 0;
  long heads = 0;
  double prior_a = 1.0;
  double prior_b = 1.0;
  double threshold = 0.5;
};

struct NormalPosteriorProblem {
  double prior_mean = 0.0;
  double prior_var = 1.0;
  std::vector<double> obs;
  double lik_var = 1.0;
};

struct MeanEstimateProblem {
  std::vector<double> obs;
  double sigma = 1.0;
  double conf = 0.95;
};

struct AtomProblem {
  long level = 1;  // quantum level; the classical solver ignores it
};

struct NoParams {};

using SolverProblem = std::variant<CoinTestProblem, CoinPosteriorProblem,
                                   NormalPosteriorProblem, MeanEstimateProblem,
                                   AtomProblem, NoParams>;

class SolverRegistry {
 public:
  using Solver = std::function<SolverOutput(const SolverProblem&)>;

  // All seven universes: the four numeric solvers plus explanatory stubs for
  // STAT_MIXED, STAT_ILL_POSED and PHYS_RELATIVITY.
  static SolverRegistry standard();

  void register_solver(const UniverseId& u, Solver solver);
  bool has(const UniverseId& u) const;

  SolverOutput dispatch(const UniverseId& u, const SolverProblem& problem) const;

 private:
  std::map<std::string, Solver> solvers_;
};

// Fixed demo problem for each built-in universe, so soft routing and the
// latency benchmark can invoke every contributing solver without inventing
// parameters.
SolverProblem canonical_problem(const UniverseId& u);

struct CombinedOutput {
  std::vector<Claim> claims;
  MixingVerdict verdict;
};

// Probability-weighted combination of solver outputs, joined on claim names.
// With one participating universe the claims pass through untouched. With
// several, a claim is combined only when at least two participants share its
// name; the value is sum of p_u * value_u over the universes carrying it.
// Inconsistent mixtures still produce numbers; the verdict flags them.
// Throws when several participants share no claim name at all.
CombinedOutput route_soft_and_combine(
    const RoutingDecision& decision, const UniverseRegistry& registry,
    const std::map<std::string, SolverOutput>& outputs,
    const IncompatibilityRegistry& reg);

}  // namespace epirouter
