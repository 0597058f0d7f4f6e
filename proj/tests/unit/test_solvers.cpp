#include <doctest.h>

#include <cmath>
#include <map>
#include <stdexcept>
#include <vector>

#include "epirouter/solvers.hpp"

using namespace epirouter;

namespace {

const Claim& find_claim(const SolverOutput& out, const std::string& name) {
  for (const Claim& c : out.claims) {
    if (c.name == name) return c;
  }
  const std::string missing = "claim not found: " + name;
  REQUIRE_MESSAGE(false, missing);
  static Claim dummy;
  return dummy;
}

double claim_value(const SolverOutput& out, const std::string& name) {
  return find_claim(out, name).value;
}

MixingVerdict mix(std::vector<std::pair<UniverseId, double>> w) {
  return check_mixing(w, IncompatibilityRegistry::standard());
}

}  // namespace

TEST_CASE("coin z-test on 60 heads out of 100") {
  SolverOutput out = solve_freq_coin(100, 60, 0.05);
  CHECK(out.universe == UniverseId{"STAT_FREQ"});
  CHECK(out.validity_domain == UniverseId{"STAT_FREQ"});
  CHECK(claim_value(out, "z_statistic") == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(claim_value(out, "probability") ==
        doctest::Approx(0.0455002638963584).epsilon(1e-9));
  CHECK(out.verdict == "reject H0");
}

TEST_CASE("coin z-test edge cases") {
  SolverOutput fair = solve_freq_coin(100, 50, 0.05);
  CHECK(claim_value(fair, "z_statistic") == 0.0);
  CHECK(claim_value(fair, "probability") == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(fair.verdict == "fail to reject H0");

  // 220/400 also gives z = 2; the two-sided p-value equals erfc(z / sqrt 2)
  SolverOutput out = solve_freq_coin(400, 220, 0.05);
  CHECK(claim_value(out, "z_statistic") == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(claim_value(out, "probability") ==
        doctest::Approx(std::erfc(2.0 / std::sqrt(2.0))).epsilon(1e-12));

  CHECK_THROWS_AS(solve_freq_coin(0, 0, 0.05), std::invalid_argument);
  CHECK_THROWS_AS(solve_freq_coin(10, 11, 0.05), std::invalid_argument);
  CHECK_THROWS_AS(solve_freq_coin(10, -1, 0.05), std::invalid_argument);
  CHECK_THROWS_AS(solve_freq_coin(10, 5, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(solve_freq_coin(10, 5, 1.0), std::invalid_argument);
}

TEST_CASE("coin posterior on 60 heads out of 100") {
  SolverOutput out = solve_bayes_coin(100, 60, 1.0, 1.0, 0.5);
  CHECK(out.universe == UniverseId{"STAT_BAYES"});
  CHECK(claim_value(out, "posterior_alpha") == 61.0);
  CHECK(claim_value(out, "posterior_beta") == 41.0);
  CHECK(claim_value(out, "probability") == doctest::Approx(0.977).epsilon(1e-3));
  CHECK(out.verdict == "posterior Beta(61, 41)");
}

TEST_CASE("coin posterior closed forms") {
  // no data: the prior passes through and P(theta > 1/2) = 1/2 by symmetry
  SolverOutput none = solve_bayes_coin(0, 0, 1.0, 1.0, 0.5);
  CHECK(claim_value(none, "posterior_alpha") == 1.0);
  CHECK(claim_value(none, "posterior_beta") == 1.0);
  CHECK(claim_value(none, "probability") == doctest::Approx(0.5).epsilon(1e-12));

  // two heads in two flips: Beta(3, 1), tail above 1/2 is 1 - (1/2)^3
  SolverOutput hh = solve_bayes_coin(2, 2, 1.0, 1.0, 0.5);
  CHECK(claim_value(hh, "probability") == doctest::Approx(0.875).epsilon(1e-12));
  CHECK(hh.verdict == "posterior Beta(3, 1)");

  CHECK_THROWS_AS(solve_bayes_coin(2, 3, 1.0, 1.0, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(solve_bayes_coin(2, 1, 0.0, 1.0, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(solve_bayes_coin(2, 1, 1.0, 1.0, 1.0), std::invalid_argument);
}

TEST_CASE("normal posterior on the three-point sample") {
  const std::vector<double> obs{2.1, 1.9, 2.3};
  SolverOutput out = solve_bayes_normal(0.0, 1.0, obs, 1.0);
  CHECK(claim_value(out, "estimate") == doctest::Approx(1.575).epsilon(1e-12));
  CHECK(claim_value(out, "posterior_variance") ==
        doctest::Approx(0.25).epsilon(1e-12));
  // central 95% interval: 1.575 +- 1.959963984540054 * 0.5
  CHECK(claim_value(out, "interval_low") ==
        doctest::Approx(1.575 - 1.959963984540054 * 0.5).epsilon(1e-12));
  CHECK(claim_value(out, "interval_high") ==
        doctest::Approx(1.575 + 1.959963984540054 * 0.5).epsilon(1e-12));
  CHECK(out.verdict == "posterior N(1.575, 0.25)");
}

TEST_CASE("normal posterior limits") {
  // no observations: the prior is the posterior
  SolverOutput prior = solve_bayes_normal(0.7, 2.0, {}, 1.0);
  CHECK(claim_value(prior, "estimate") == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(claim_value(prior, "posterior_variance") ==
        doctest::Approx(2.0).epsilon(1e-12));

  // one observation, unit variances: shrink halfway
  const std::vector<double> one{2.0};
  SolverOutput half = solve_bayes_normal(0.0, 1.0, one, 1.0);
  CHECK(claim_value(half, "estimate") == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(claim_value(half, "posterior_variance") ==
        doctest::Approx(0.5).epsilon(1e-12));

  // a flat prior recovers the sample mean
  const std::vector<double> obs{2.1, 1.9, 2.3};
  SolverOutput flat = solve_bayes_normal(0.0, 1e12, obs, 1.0);
  CHECK(std::fabs(claim_value(flat, "estimate") - 2.1) < 1e-6);

  CHECK_THROWS_AS(solve_bayes_normal(0.0, 0.0, obs, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(solve_bayes_normal(0.0, 1.0, obs, -1.0), std::invalid_argument);
}

TEST_CASE("gaussian point estimate with confidence interval") {
  const std::vector<double> obs{2.1, 1.9, 2.3};
  SolverOutput out = solve_freq_normal_mle(obs, 1.0, 0.95);
  CHECK(out.universe == UniverseId{"STAT_FREQ"});
  const double half = 1.959963984540054 / std::sqrt(3.0);
  CHECK(claim_value(out, "estimate") == doctest::Approx(2.1).epsilon(1e-12));
  CHECK(claim_value(out, "interval_low") ==
        doctest::Approx(2.1 - half).epsilon(1e-12));
  CHECK(claim_value(out, "interval_high") ==
        doctest::Approx(2.1 + half).epsilon(1e-12));
  // rounded to two decimals this is the [0.97, 3.23] interval
  CHECK(claim_value(out, "interval_low") == doctest::Approx(0.968).epsilon(5e-4));
  CHECK(claim_value(out, "interval_high") == doctest::Approx(3.232).epsilon(5e-4));
  CHECK(out.verdict == "95% confidence interval");

  const std::vector<double> zero{0.0};
  SolverOutput z = solve_freq_normal_mle(zero, 1.0, 0.95);
  CHECK(claim_value(z, "interval_high") ==
        doctest::Approx(1.959963984540054).epsilon(1e-12));
  CHECK(claim_value(z, "interval_low") ==
        doctest::Approx(-1.959963984540054).epsilon(1e-12));

  const std::vector<double> ones{1.0, 1.0, 1.0, 1.0};
  SolverOutput w = solve_freq_normal_mle(ones, 2.0, 0.95);
  // half-width = q * 2 / sqrt(4) = q
  CHECK(claim_value(w, "interval_low") ==
        doctest::Approx(1.0 - 1.959963984540054).epsilon(1e-12));

  CHECK_THROWS_AS(solve_freq_normal_mle({}, 1.0, 0.95), std::invalid_argument);
  CHECK_THROWS_AS(solve_freq_normal_mle(obs, 0.0, 0.95), std::invalid_argument);
  CHECK_THROWS_AS(solve_freq_normal_mle(obs, 1.0, 1.0), std::invalid_argument);
}

TEST_CASE("classical electron spirals in") {
  SolverOutput out = solve_classical_atom();
  CHECK(out.universe == UniverseId{"PHYS_CLASSICAL"});
  CHECK(out.verdict == "unstable: radiative collapse");
  const Claim& t = find_claim(out, "collapse_time_s");
  CHECK(t.units == "s");
  const double a0 = 5.29177210903e-11;
  const double re = 2.8179403262e-15;
  const double c = 299792458.0;
  const double expected = a0 * a0 * a0 / (4.0 * re * re * c);
  CHECK(t.value == doctest::Approx(expected).epsilon(1e-14));
  // the textbook order of magnitude: tens of picoseconds
  CHECK(t.value > 1e-12);
  CHECK(t.value < 1e-10);

  // collapse time scales as radius cubed
  SolverOutput wide = solve_classical_atom(2.0 * a0);
  CHECK(claim_value(wide, "collapse_time_s") ==
        doctest::Approx(8.0 * expected).epsilon(1e-12));

  CHECK_THROWS_AS(solve_classical_atom(0.0), std::invalid_argument);
  CHECK_THROWS_AS(solve_classical_atom(-1.0), std::invalid_argument);
}

TEST_CASE("hydrogen bound states") {
  SolverOutput ground = solve_quantum_atom(1);
  CHECK(ground.universe == UniverseId{"PHYS_QUANTUM"});
  CHECK(ground.verdict == "stationary state: no collapse");
  CHECK(claim_value(ground, "energy_ev") == -13.6057);
  CHECK(find_claim(ground, "energy_ev").units == "eV");
  CHECK(claim_value(ground, "level") == 1.0);

  SolverOutput first = solve_quantum_atom(2);
  CHECK(claim_value(first, "energy_ev") ==
        doctest::Approx(-13.6057 / 4.0).epsilon(1e-14));

  // energy levels approach zero from below
  SolverOutput high = solve_quantum_atom(1000000);
  CHECK(claim_value(high, "energy_ev") < 0.0);
  CHECK(std::fabs(claim_value(high, "energy_ev")) < 1e-10);

  CHECK_THROWS_AS(solve_quantum_atom(0), std::invalid_argument);
  CHECK_THROWS_AS(solve_quantum_atom(-3), std::invalid_argument);
}

TEST_CASE("mixing verdict for a single universe") {
  MixingVerdict v = mix({{UniverseId{"STAT_FREQ"}, 1.0}});
  CHECK(v.consistent);
  CHECK(v.participants.size() == 1);
  CHECK(v.reason == "all weight in a single validity domain");
}

TEST_CASE("frequentist and bayesian weight cannot be mixed") {
  for (double alpha : {0.001, 0.4, 0.999}) {
    MixingVerdict v = mix({{UniverseId{"STAT_FREQ"}, alpha},
                           {UniverseId{"STAT_BAYES"}, 1.0 - alpha}});
    CHECK_FALSE(v.consistent);
    CHECK(v.participants.size() == 2);
    CHECK(v.reason.find("STAT_FREQ") != std::string::npos);
    CHECK(v.reason.find("STAT_BAYES") != std::string::npos);
  }
}

TEST_CASE("compatible universes may share weight") {
  MixingVerdict v = mix({{UniverseId{"STAT_FREQ"}, 0.5},
                         {UniverseId{"PHYS_RELATIVITY"}, 0.5}});
  CHECK(v.consistent);
  CHECK(v.reason == "no two weighted universes are incompatible");

  MixingVerdict rel = mix({{UniverseId{"PHYS_CLASSICAL"}, 0.3},
                           {UniverseId{"PHYS_RELATIVITY"}, 0.7}});
  CHECK(rel.consistent);
}

TEST_CASE("classical and quantum weight cannot be mixed") {
  MixingVerdict v = mix({{UniverseId{"PHYS_CLASSICAL"}, 0.5},
                         {UniverseId{"PHYS_QUANTUM"}, 0.5}});
  CHECK_FALSE(v.consistent);
}

TEST_CASE("mixing verdict ignores enumeration order") {
  MixingVerdict a = mix({{UniverseId{"STAT_FREQ"}, 0.6},
                         {UniverseId{"STAT_BAYES"}, 0.4}});
  MixingVerdict b = mix({{UniverseId{"STAT_BAYES"}, 0.4},
                         {UniverseId{"STAT_FREQ"}, 0.6}});
  CHECK(a.consistent == b.consistent);
  CHECK(a.reason == b.reason);
  REQUIRE(a.participants.size() == b.participants.size());
  for (std::size_t i = 0; i < a.participants.size(); ++i) {
    CHECK(a.participants[i].first == b.participants[i].first);
  }
}

TEST_CASE("negligible weight does not count as participation") {
  const double eps = 1e-12;
  MixingVerdict at = mix({{UniverseId{"STAT_FREQ"}, 1.0 - eps},
                          {UniverseId{"STAT_BAYES"}, eps}});
  CHECK(at.consistent);  // exactly at the threshold is excluded

  const double above = 1e-11;
  MixingVerdict hot = mix({{UniverseId{"STAT_FREQ"}, 1.0 - above},
                           {UniverseId{"STAT_BAYES"}, above}});
  CHECK_FALSE(hot.consistent);
}

TEST_CASE("mixing verdict validates the weight vector") {
  CHECK_THROWS_AS(mix({{UniverseId{"STAT_FREQ"}, 0.5},
                       {UniverseId{"STAT_BAYES"}, 0.4}}),
                  std::invalid_argument);  // sums to 0.9
  CHECK_THROWS_AS(mix({{UniverseId{"STAT_FREQ"}, 1.5},
                       {UniverseId{"STAT_BAYES"}, -0.5}}),
                  std::invalid_argument);
  CHECK_THROWS_AS(mix({{UniverseId{"STAT_FREQ"}, 0.5},
                       {UniverseId{"STAT_FREQ"}, 0.5}}),
                  std::invalid_argument);  // duplicate universe
  CHECK_THROWS_AS(mix({}), std::invalid_argument);
}

TEST_CASE("incompatibility marks are symmetric and irreflexive") {
  IncompatibilityRegistry reg;
  CHECK_FALSE(reg.incompatible(UniverseId{"A"}, UniverseId{"B"}));
  reg.mark_incompatible(UniverseId{"A"}, UniverseId{"B"});
  CHECK(reg.incompatible(UniverseId{"A"}, UniverseId{"B"}));
  CHECK(reg.incompatible(UniverseId{"B"}, UniverseId{"A"}));
  CHECK_FALSE(reg.incompatible(UniverseId{"A"}, UniverseId{"A"}));
  CHECK_THROWS_AS(reg.mark_incompatible(UniverseId{"A"}, UniverseId{"A"}),
                  std::invalid_argument);
}

TEST_CASE("solver dispatch matches direct calls") {
  SolverRegistry reg = SolverRegistry::standard();
  UniverseRegistry universes = UniverseRegistry::standard();
  for (const UniverseId& u : universes.list()) {
    CHECK(reg.has(u));
  }

  SolverOutput via = reg.dispatch(UniverseId{"STAT_FREQ"},
                                  CoinTestProblem{100, 60, 0.05});
  SolverOutput direct = solve_freq_coin(100, 60, 0.05);
  REQUIRE(via.claims.size() == direct.claims.size());
  for (std::size_t i = 0; i < via.claims.size(); ++i) {
    CHECK(via.claims[i].name == direct.claims[i].name);
    CHECK(via.claims[i].value == direct.claims[i].value);
  }
  CHECK(via.verdict == direct.verdict);

  SolverOutput q = reg.dispatch(UniverseId{"PHYS_QUANTUM"}, AtomProblem{2});
  CHECK(claim_value(q, "level") == 2.0);

  CHECK_THROWS_AS(reg.dispatch(UniverseId{"CUSTOM"}, NoParams{}), RegistryError);
  CHECK_THROWS_AS(reg.dispatch(UniverseId{"STAT_FREQ"}, AtomProblem{1}),
                  std::invalid_argument);
}

TEST_CASE("non-numeric universes answer with verdicts only") {
  SolverRegistry reg = SolverRegistry::standard();
  SolverOutput mixed = reg.dispatch(UniverseId{"STAT_MIXED"}, NoParams{});
  CHECK(mixed.claims.empty());
  CHECK(mixed.verdict == "requires framework comparison");

  SolverOutput ill = reg.dispatch(UniverseId{"STAT_ILL_POSED"}, NoParams{});
  CHECK(ill.claims.empty());
  CHECK(ill.verdict == "unanswerable: missing information");

  SolverOutput rel = reg.dispatch(UniverseId{"PHYS_RELATIVITY"}, NoParams{});
  CHECK(rel.claims.empty());
  CHECK(rel.verdict == "no numeric model: relativistic regime stub");
}

TEST_CASE("canonical problems dispatch cleanly for every universe") {
  SolverRegistry solvers = SolverRegistry::standard();
  UniverseRegistry universes = UniverseRegistry::standard();
  for (const UniverseId& u : universes.list()) {
    SolverOutput out = solvers.dispatch(u, canonical_problem(u));
    CHECK(out.universe == u);
  }
}

TEST_CASE("soft combination with all weight on one universe") {
  UniverseRegistry reg;
  reg.register_universe("STAT_FREQ");
  reg.register_universe("STAT_BAYES");

  RoutingDecision d;
  d.probabilities = {1.0, 0.0};
  d.chosen = UniverseId{"STAT_FREQ"};
  d.confidence = 1.0;

  std::map<std::string, SolverOutput> outputs;
  outputs["STAT_FREQ"] = solve_freq_coin(100, 60, 0.05);

  CombinedOutput combined = route_soft_and_combine(
      d, reg, outputs, IncompatibilityRegistry::standard());
  CHECK(combined.verdict.consistent);
  REQUIRE(combined.claims.size() == 2);  // claims pass through untouched
  CHECK(combined.claims[0].name == "z_statistic");
  CHECK(combined.claims[0].value == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("soft combination joins shared claim names only") {
  UniverseRegistry reg;
  reg.register_universe("STAT_FREQ");
  reg.register_universe("STAT_BAYES");

  RoutingDecision d;
  d.probabilities = {0.6, 0.4};
  d.chosen = UniverseId{"STAT_FREQ"};
  d.confidence = 0.6;

  SolverOutput freq = solve_freq_coin(100, 60, 0.05);
  SolverOutput bayes = solve_bayes_coin(100, 60, 1.0, 1.0, 0.5);
  std::map<std::string, SolverOutput> outputs{{"STAT_FREQ", freq},
                                              {"STAT_BAYES", bayes}};

  CombinedOutput combined = route_soft_and_combine(
      d, reg, outputs, IncompatibilityRegistry::standard());

  // both emit "probability" but mean different things; the blend answers
  // neither question, and the verdict says so
  CHECK_FALSE(combined.verdict.consistent);
  REQUIRE(combined.claims.size() == 1);
  CHECK(combined.claims[0].name == "probability");
  const double expected = 0.6 * claim_value(freq, "probability") +
                          0.4 * claim_value(bayes, "probability");
  CHECK(combined.claims[0].value == doctest::Approx(expected).epsilon(1e-12));
  CHECK(combined.claims[0].value == doctest::Approx(0.418).epsilon(2e-3));
}

TEST_CASE("soft combination fails without a shared claim name") {
  UniverseRegistry reg;
  reg.register_universe("STAT_FREQ");
  reg.register_universe("PHYS_QUANTUM");

  RoutingDecision d;
  d.probabilities = {0.5, 0.5};
  d.chosen = UniverseId{"STAT_FREQ"};
  d.confidence = 0.5;

  std::map<std::string, SolverOutput> outputs{
      {"STAT_FREQ", solve_freq_coin(100, 60, 0.05)},
      {"PHYS_QUANTUM", solve_quantum_atom(1)}};

  CHECK_THROWS_AS(route_soft_and_combine(d, reg, outputs,
                                         IncompatibilityRegistry::standard()),
                  std::domain_error);
}

TEST_CASE("soft combination validates its inputs") {
  UniverseRegistry reg;
  reg.register_universe("STAT_FREQ");
  reg.register_universe("STAT_BAYES");

  RoutingDecision d;
  d.probabilities = {0.6, 0.4};
  d.chosen = UniverseId{"STAT_FREQ"};
  d.confidence = 0.6;

  // participating universe with no solver output on record
  std::map<std::string, SolverOutput> missing{
      {"STAT_FREQ", solve_freq_coin(100, 60, 0.05)}};
  CHECK_THROWS_AS(route_soft_and_combine(d, reg, missing,
                                         IncompatibilityRegistry::standard()),
                  std::invalid_argument);

  RoutingDecision short_probs;
  short_probs.probabilities = {1.0};
  short_probs.chosen = UniverseId{"STAT_FREQ"};
  short_probs.confidence = 1.0;
  CHECK_THROWS_AS(route_soft_and_combine(short_probs, reg, missing,
                                         IncompatibilityRegistry::standard()),
                  std::invalid_argument);
}
