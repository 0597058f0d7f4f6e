#include "epirouter/evalstats.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include "epirouter/special_functions.hpp"

namespace epirouter {

EvalReport evaluate(const LinearRouter& router, const EmbeddingProvider& provider,
                    const Corpus& corpus, std::initializer_list<Split> splits) {
  const UniverseRegistry& registry = corpus.registry();
  const std::size_t k = registry.size();

  EvalReport report;
  report.n_universes = k;
  report.confusion.assign(k * k, 0);

  std::map<Split, std::size_t> split_correct;
  std::vector<std::size_t> universe_total(k, 0), universe_correct(k, 0);
  std::size_t correct = 0;

  for (const Question& q : corpus.samples()) {
    if (std::find(splits.begin(), splits.end(), q.split) == splits.end()) {
      continue;
    }
    const std::size_t truth = registry.index_of(q.label);
    const std::size_t pred =
        registry.index_of(router.route_hard(provider.embed(q.text)));
    report.confusion[truth * k + pred]++;
    universe_total[truth]++;
    report.count_by_split[q.split]++;
    report.total++;
    if (pred == truth) {
      universe_correct[truth]++;
      split_correct[q.split]++;
      correct++;
    }
  }
  if (report.total == 0) {
    throw std::invalid_argument("evaluate: no samples in the requested splits");
  }

  report.overall_accuracy =
      static_cast<double>(correct) / static_cast<double>(report.total);
  for (const auto& [split, count] : report.count_by_split) {
    report.accuracy_by_split[split] =
        static_cast<double>(split_correct[split]) / static_cast<double>(count);
  }
  report.accuracy_by_universe.resize(k);
  for (std::size_t u = 0; u < k; ++u) {
    if (universe_total[u] > 0) {
      report.accuracy_by_universe[u] = static_cast<double>(universe_correct[u]) /
                                       static_cast<double>(universe_total[u]);
    }
  }
  if (report.accuracy_by_split.count(Split::test) &&
      report.accuracy_by_split.count(Split::unseen)) {
    report.generalization_gap = report.accuracy_by_split[Split::test] -
                                report.accuracy_by_split[Split::unseen];
  }
  return report;
}

McNemarResult mcnemar_test(const PairedOutcomes& p) {
  const double b = static_cast<double>(p.b);
  const double c = static_cast<double>(p.c);
  if (p.b + p.c == 0) {
    throw std::invalid_argument(
        "mcnemar_test: no discordant pairs, test undefined");
  }
  const double corrected = std::max(std::fabs(b - c) - 1.0, 0.0);
  McNemarResult r;
  r.statistic = corrected * corrected / (b + c);
  r.p_value = chi_square1_sf(r.statistic);
  return r;
}

namespace {

std::uint64_t percentile_ns(std::vector<std::uint64_t>& samples, double q) {
  // Nearest-rank on the sorted sample; callers pass q in [0, 1].
  const std::size_t idx = std::min(
      samples.size() - 1,
      static_cast<std::size_t>(q * static_cast<double>(samples.size())));
  return samples[idx];
}

}  // namespace

LatencyReport latency_bench(const LinearRouter& router,
                            const EmbeddingProvider& provider,
                            const Corpus& corpus, const SolverRegistry& solvers,
                            const IncompatibilityRegistry& incompat,
                            std::size_t iterations) {
  if (iterations < 1000) {
    throw std::invalid_argument("latency_bench: need iterations >= 1000");
  }
  if (corpus.size() == 0) {
    throw std::invalid_argument("latency_bench: empty corpus");
  }

  std::vector<FeatureVector> inputs;
  inputs.reserve(corpus.size());
  for (const Question& q : corpus.samples()) {
    inputs.push_back(provider.embed(q.text));
  }

  const UniverseRegistry& registry = router.registry();
  const std::size_t warmup = std::max<std::size_t>(100, iterations / 10);

  auto run_hard = [&](const FeatureVector& x) {
    volatile std::size_t sink =
        router.route_hard(x).symbol.size();  // keep the call alive
    (void)sink;
  };
  auto run_soft = [&](const FeatureVector& x) {
    const RoutingDecision d = router.predict_probs(x);
    std::map<std::string, SolverOutput> outputs;
    for (std::size_t u = 0; u < registry.size(); ++u) {
      if (d.probabilities[u] > kWeightEpsilon) {
        const UniverseId& universe = registry.at(u);
        outputs.emplace(universe.symbol,
                        solvers.dispatch(universe, canonical_problem(universe)));
      }
    }
    // Combination can be undefined for some inputs (participants sharing no
    // claim names); the call still did the full soft-path work, so it counts.
    try {
      volatile std::size_t sink =
          route_soft_and_combine(d, registry, outputs, incompat).claims.size();
      (void)sink;
    } catch (const std::domain_error&) {
    }
  };

  using clock = std::chrono::steady_clock;
  auto bench = [&](auto&& call) {
    for (std::size_t i = 0; i < warmup; ++i) call(inputs[i % inputs.size()]);
    std::vector<std::uint64_t> ns;
    ns.reserve(iterations);
    for (std::size_t i = 0; i < iterations; ++i) {
      const FeatureVector& x = inputs[i % inputs.size()];
      const auto t0 = clock::now();
      call(x);
      const auto t1 = clock::now();
      ns.push_back(static_cast<std::uint64_t>(
          std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0)
              .count()));
    }
    std::sort(ns.begin(), ns.end());
    return std::pair{percentile_ns(ns, 0.5), percentile_ns(ns, 0.95)};
  };

  LatencyReport report;
  report.calls_per_strategy = iterations;
  report.warmup_calls = warmup;
  std::tie(report.hard_median_ns, report.hard_p95_ns) = bench(run_hard);
  std::tie(report.soft_median_ns, report.soft_p95_ns) = bench(run_soft);
  return report;
}

}  // namespace epirouter
