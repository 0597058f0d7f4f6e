#include "epirouter/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include "epirouter/errors.hpp"
#include "epirouter/special_functions.hpp"

namespace epirouter {

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

SolverOutput make_output(const char* universe, std::string verdict,
                         std::vector<Claim> claims) {
  SolverOutput out;
  out.universe = UniverseId{universe};
  out.validity_domain = out.universe;
  out.verdict = std::move(verdict);
  out.claims = std::move(claims);
  return out;
}

}  // namespace

// --- Mixing ------------------------------------------------------------------

IncompatibilityRegistry IncompatibilityRegistry::standard() {
  IncompatibilityRegistry reg;
  reg.mark_incompatible(UniverseId{kStatFreq}, UniverseId{kStatBayes});
  reg.mark_incompatible(UniverseId{kPhysClassical}, UniverseId{kPhysQuantum});
  return reg;
}

void IncompatibilityRegistry::mark_incompatible(const UniverseId& a,
                                                const UniverseId& b) {
  if (a == b) {
    throw std::invalid_argument(
        "incompatibility is irreflexive: " + a.symbol);
  }
  pairs_.insert(std::minmax(a.symbol, b.symbol));
}

bool IncompatibilityRegistry::incompatible(const UniverseId& a,
                                           const UniverseId& b) const {
  if (a == b) return false;
  return pairs_.count(std::minmax(a.symbol, b.symbol)) != 0;
}

MixingVerdict check_mixing(
    std::span<const std::pair<UniverseId, double>> weights,
    const IncompatibilityRegistry& reg) {
  double sum = 0.0;
  for (const auto& [u, w] : weights) {
    if (w < 0.0) {
      throw std::invalid_argument("check_mixing: negative weight for " +
                                  u.symbol);
    }
    sum += w;
  }
  if (std::fabs(sum - 1.0) > 1e-9) {
    throw std::invalid_argument("check_mixing: weights sum to " + fmt(sum) +
                                ", expected 1");
  }

  MixingVerdict v;
  for (const auto& [u, w] : weights) {
    if (w > kWeightEpsilon) v.participants.emplace_back(u, w);
  }
  // Canonical order, so the verdict ignores the caller's enumeration order.
  std::sort(v.participants.begin(), v.participants.end(),
            [](const auto& a, const auto& b) {
              return a.first.symbol < b.first.symbol;
            });
  for (std::size_t i = 1; i < v.participants.size(); ++i) {
    if (v.participants[i].first == v.participants[i - 1].first) {
      throw std::invalid_argument("check_mixing: duplicate universe " +
                                  v.participants[i].first.symbol);
    }
  }

  for (std::size_t i = 0; i < v.participants.size(); ++i) {
    for (std::size_t j = i + 1; j < v.participants.size(); ++j) {
      const auto& [ua, wa] = v.participants[i];
      const auto& [ub, wb] = v.participants[j];
      if (reg.incompatible(ua, ub)) {
        v.consistent = false;
        v.reason = "convex mixture of incompatible universes " + ua.symbol +
                   " (weight " + fmt(wa) + ") and " + ub.symbol + " (weight " +
                   fmt(wb) + ")";
        return v;
      }
    }
  }
  v.consistent = true;
  v.reason = v.participants.size() <= 1
                 ? "all weight in a single validity domain"
                 : "no two weighted universes are incompatible";
  return v;
}

// --- Solvers -------------------------------------------------------------------

SolverOutput solve_freq_coin(long n, long heads, double alpha) {
  if (n < 1 || heads < 0 || heads > n) {
    throw std::invalid_argument("solve_freq_coin: need 0 <= heads <= n, n >= 1");
  }
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("solve_freq_coin: alpha must lie in (0, 1)");
  }
  const double phat = static_cast<double>(heads) / static_cast<double>(n);
  const double z = (phat - 0.5) / std::sqrt(0.25 / static_cast<double>(n));
  const double p = 2.0 * (1.0 - normal_cdf(std::fabs(z)));
  return make_output(kStatFreq,
                     p < alpha ? "reject H0" : "fail to reject H0",
                     {{"z_statistic", z, ""}, {"probability", p, ""}});
}

SolverOutput solve_bayes_coin(long n, long heads, double prior_a,
                              double prior_b, double threshold) {
  if (n < 0 || heads < 0 || heads > n) {
    throw std::invalid_argument("solve_bayes_coin: need 0 <= heads <= n");
  }
  if (!(prior_a > 0.0) || !(prior_b > 0.0)) {
    throw std::invalid_argument("solve_bayes_coin: prior must be positive");
  }
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw std::invalid_argument("solve_bayes_coin: threshold must lie in (0, 1)");
  }
  const double a = prior_a + static_cast<double>(heads);
  const double b = prior_b + static_cast<double>(n - heads);
  const double tail = 1.0 - regularized_incomplete_beta(a, b, threshold);
  return make_output(kStatBayes,
                     "posterior Beta(" + fmt(a) + ", " + fmt(b) + ")",
                     {{"posterior_alpha", a, ""},
                      {"posterior_beta", b, ""},
                      {"probability", tail, ""}});
}

SolverOutput solve_bayes_normal(double prior_mean, double prior_var,
                                std::span<const double> obs, double lik_var) {
  if (!(prior_var > 0.0) || !(lik_var > 0.0)) {
    throw std::invalid_argument("solve_bayes_normal: variances must be positive");
  }
  const double n = static_cast<double>(obs.size());
  const double sum = std::accumulate(obs.begin(), obs.end(), 0.0);
  const double precision = 1.0 / prior_var + n / lik_var;
  const double mean = (prior_mean / prior_var + sum / lik_var) / precision;
  const double var = 1.0 / precision;
  const double half = normal_quantile(0.975) * std::sqrt(var);
  return make_output(kStatBayes,
                     "posterior N(" + fmt(mean) + ", " + fmt(var) + ")",
                     {{"estimate", mean, ""},
                      {"posterior_variance", var, ""},
                      {"interval_low", mean - half, ""},
                      {"interval_high", mean + half, ""}});
}

SolverOutput solve_freq_normal_mle(std::span<const double> obs, double sigma,
                                   double conf) {
  if (obs.empty()) {
    throw std::invalid_argument("solve_freq_normal_mle: need >= 1 observation");
  }
  if (!(sigma > 0.0)) {
    throw std::invalid_argument("solve_freq_normal_mle: sigma must be positive");
  }
  if (!(conf > 0.0 && conf < 1.0)) {
    throw std::invalid_argument("solve_freq_normal_mle: confidence must lie in (0, 1)");
  }
  const double n = static_cast<double>(obs.size());
  const double mean = std::accumulate(obs.begin(), obs.end(), 0.0) / n;
  const double half = normal_quantile((1.0 + conf) / 2.0) * sigma / std::sqrt(n);
  return make_output(kStatFreq,
                     fmt(conf * 100.0) + "% confidence interval",
                     {{"estimate", mean, ""},
                      {"interval_low", mean - half, ""},
                      {"interval_high", mean + half, ""}});
}

SolverOutput solve_classical_atom(double initial_radius) {
  if (!(initial_radius > 0.0)) {
    throw std::invalid_argument("solve_classical_atom: radius must be positive");
  }
  const double r = initial_radius;
  const double t = r * r * r /
                   (4.0 * kClassicalElectronRadiusM *
                    kClassicalElectronRadiusM * kSpeedOfLightMS);
  return make_output(kPhysClassical, "unstable: radiative collapse",
                     {{"collapse_time_s", t, "s"}});
}

SolverOutput solve_quantum_atom(long level) {
  if (level < 1) {
    throw std::invalid_argument("solve_quantum_atom: level must be >= 1");
  }
  const double n = static_cast<double>(level);
  const double energy = -kHydrogenGroundStateEv / (n * n);
  return make_output(kPhysQuantum, "stationary state: no collapse",
                     {{"energy_ev", energy, "eV"},
                      {"level", n, ""}});
}

// --- Dispatch ------------------------------------------------------------------

namespace {

template <typename T>
const T& expect_problem(const SolverProblem& problem, const char* universe) {
  const T* p = std::get_if<T>(&problem);
  if (p == nullptr) {
    throw std::invalid_argument(std::string("dispatch: problem record does not "
                                            "match the solver for ") +
                                universe);
  }
  return *p;
}

}  // namespace

SolverRegistry SolverRegistry::standard() {
  SolverRegistry reg;
  reg.register_solver(UniverseId{kStatFreq}, [](const SolverProblem& p) {
    const auto& c = expect_problem<CoinTestProblem>(p, kStatFreq);
    return solve_freq_coin(c.n, c.heads, c.alpha);
  });
  reg.register_solver(UniverseId{kStatBayes}, [](const SolverProblem& p) {
    const auto& c = expect_problem<CoinPosteriorProblem>(p, kStatBayes);
    return solve_bayes_coin(c.n, c.heads, c.prior_a, c.prior_b, c.threshold);
  });
  reg.register_solver(UniverseId{kStatMixed}, [](const SolverProblem&) {
    return make_output(kStatMixed, "requires framework comparison", {});
  });
  reg.register_solver(UniverseId{kStatIllPosed}, [](const SolverProblem&) {
    return make_output(kStatIllPosed, "unanswerable: missing information", {});
  });
  reg.register_solver(UniverseId{kPhysClassical}, [](const SolverProblem& p) {
    expect_problem<AtomProblem>(p, kPhysClassical);
    return solve_classical_atom();
  });
  reg.register_solver(UniverseId{kPhysQuantum}, [](const SolverProblem& p) {
    const auto& a = expect_problem<AtomProblem>(p, kPhysQuantum);
    return solve_quantum_atom(a.level);
  });
  reg.register_solver(UniverseId{kPhysRelativity}, [](const SolverProblem&) {
    return make_output(kPhysRelativity,
                       "no numeric model: relativistic regime stub", {});
  });
  return reg;
}

void SolverRegistry::register_solver(const UniverseId& u, Solver solver) {
  if (!solver) {
    throw std::invalid_argument("register_solver: empty solver for " + u.symbol);
  }
  solvers_[u.symbol] = std::move(solver);
}

bool SolverRegistry::has(const UniverseId& u) const {
  return solvers_.count(u.symbol) != 0;
}

SolverOutput SolverRegistry::dispatch(const UniverseId& u,
                                      const SolverProblem& problem) const {
  auto it = solvers_.find(u.symbol);
  if (it == solvers_.end()) {
    throw RegistryError("no solver registered for universe: " + u.symbol);
  }
  return it->second(problem);
}

SolverProblem canonical_problem(const UniverseId& u) {
  if (u.symbol == kStatFreq) return CoinTestProblem{100, 60, 0.05};
  if (u.symbol == kStatBayes) return CoinPosteriorProblem{100, 60, 1.0, 1.0, 0.5};
  if (u.symbol == kPhysClassical) return AtomProblem{1};
  if (u.symbol == kPhysQuantum) return AtomProblem{1};
  return NoParams{};
}

CombinedOutput route_soft_and_combine(
    const RoutingDecision& decision, const UniverseRegistry& registry,
    const std::map<std::string, SolverOutput>& outputs,
    const IncompatibilityRegistry& reg) {
  if (decision.probabilities.size() != registry.size()) {
    throw std::invalid_argument(
        "route_soft_and_combine: decision does not match registry");
  }

  std::vector<std::pair<UniverseId, double>> weights;
  weights.reserve(registry.size());
  for (std::size_t i = 0; i < registry.size(); ++i) {
    weights.emplace_back(registry.at(i), decision.probabilities[i]);
  }

  CombinedOutput combined;
  combined.verdict = check_mixing(weights, reg);

  struct Contribution {
    const SolverOutput* output;
    double weight;
  };
  std::vector<Contribution> contributors;
  for (const auto& [u, w] : combined.verdict.participants) {
    auto it = outputs.find(u.symbol);
    if (it == outputs.end()) {
      throw std::invalid_argument(
          "route_soft_and_combine: missing solver output for " + u.symbol);
    }
    contributors.push_back({&it->second, w});
  }

  if (contributors.size() == 1) {
    combined.claims = contributors.front().output->claims;
    return combined;
  }

  // Join on claim name; keep only names at least two contributors carry.
  std::map<std::string, std::vector<std::pair<double, const Claim*>>> by_name;
  for (const Contribution& c : contributors) {
    for (const Claim& claim : c.output->claims) {
      by_name[claim.name].emplace_back(c.weight, &claim);
    }
  }
  for (const auto& [name, carriers] : by_name) {
    if (carriers.size() < 2) continue;
    double value = 0.0;
    for (const auto& [w, claim] : carriers) value += w * claim->value;
    combined.claims.push_back(Claim{name, value, carriers.front().second->units});
  }
  if (combined.claims.empty()) {
    throw std::domain_error(
        "soft combination undefined: participating universes share no claim "
        "names");
  }
  return combined;
}

}  // namespace epirouter
