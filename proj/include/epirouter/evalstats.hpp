#pragma once

#include <cstdint>
#include <initializer_list>
#include <map>
#include <optional>
#include <vector>

#include "epirouter/corpus.hpp"
#include "epirouter/router.hpp"
#include "epirouter/solvers.hpp"

namespace epirouter {

struct EvalReport {
  std::map<Split, double> accuracy_by_split;
  std::map<Split, std::size_t> count_by_split;
  // Indexed by registry position; nullopt when the universe has no samples.
  std::vector<std::optional<double>> accuracy_by_universe;
  std::vector<std::size_t> confusion;  // K x K row-major, row = true label
  std::size_t n_universes = 0;
  std::size_t total = 0;
  double overall_accuracy = 0.0;
  // test accuracy minus unseen accuracy; set only when both were evaluated
  std::optional<double> generalization_gap;
};

// Hard-routing evaluation over the given splits of the corpus.
EvalReport evaluate(const LinearRouter& router, const EmbeddingProvider& provider,
                    const Corpus& corpus, std::initializer_list<Split> splits);

// Discordant-pair counts for two systems scored on the same samples.
// b = first correct / second wrong, c = first wrong / second correct.
struct PairedOutcomes {
  std::size_t b = 0;
  std::size_t c = 0;
  std::size_t n = 0;  // total paired samples

  void add(bool first_correct, bool second_correct) {
    ++n;
    if (first_correct && !second_correct) ++b;
    if (!first_correct && second_correct) ++c;
  }
};

struct McNemarResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

// Continuity-corrected McNemar: (max(|b-c|-1, 0))^2 / (b+c), upper tail of
// chi-square with one degree of freedom. Undefined when b + c = 0.
McNemarResult mcnemar_test(const PairedOutcomes& p);

struct LatencyReport {
  std::uint64_t hard_median_ns = 0;
  std::uint64_t hard_p95_ns = 0;
  std::uint64_t soft_median_ns = 0;
  std::uint64_t soft_p95_ns = 0;
  std::size_t calls_per_strategy = 0;
  std::size_t warmup_calls = 0;
};

// Wall-clock per routing call over the corpus's feature vectors, monotonic
// clock, one strategy at a time. Hard times route_hard alone; soft times
// predict_probs plus dispatch of every universe above the weight threshold
// plus the claim combination. Warm-up calls (>= 100) are discarded.
LatencyReport latency_bench(const LinearRouter& router,
                            const EmbeddingProvider& provider,
                            const Corpus& corpus, const SolverRegistry& solvers,
                            const IncompatibilityRegistry& incompat,
                            std::size_t iterations);

}  // namespace epirouter
