#pragma once

#include <cstdint>
#include <vector>

#include "epirouter/corpus.hpp"
#include "epirouter/router.hpp"

namespace epirouter {

// Ordered universe-introduction schedule. Phase k's training set is the
// train-split samples labeled with phase k's universes.
struct PhasePlan {
  std::vector<std::vector<UniverseId>> phases;
};

// The bundled schedule: statistics universes plus the classical one first,
// then the quantum and relativistic universes.
PhasePlan default_two_phase_plan();

// The three curricula compared in the ordering experiment. All cover the
// seven built-in universes in two phases.
std::vector<PhasePlan> default_expansion_orders();

struct CLResult {
  double old_acc_before = 0.0;  // old-universe test accuracy after the
                                // next-to-last phase
  double old_acc_after = 0.0;   // same set after the final phase
  double new_acc = 0.0;         // final-phase-universe test accuracy
  double overall_acc = 0.0;     // all-universe test accuracy after training
  double forgetting = 0.0;      // old_acc_before - old_acc_after
};

// Diagonal empirical Fisher information: per-parameter mean squared gradient
// of the log-probability of the true label. Layout matches LinearRouter.
struct FisherDiag {
  std::vector<double> w;
  std::vector<double> b;
};

FisherDiag compute_fisher_diag(const LinearRouter& r,
                               const RouterDataset& data);

enum class CLMethod { naive, ewc, rehearsal };

// Replay selection: ceil(fraction * |prior|) indices into `prior`, allocated
// across universes proportionally (largest remainder) and drawn without
// replacement, seeded per universe.
std::vector<std::size_t> select_replay_indices(const RouterDataset& prior,
                                               double fraction,
                                               std::uint64_t seed,
                                               const UniverseRegistry& registry);

struct CLRun {
  CLResult result;
  LinearRouter router;  // final parameters, output layer sized for the registry
};

// Sequential training over the plan's phases. The router's output layer is
// sized for the full registry from the start, so later phases change no
// shapes. All methods share the phase seeds, which keeps ewc at lambda = 0
// bitwise-identical to naive. lambda applies to ewc, fraction to rehearsal.
CLRun run_continual(const Corpus& corpus, const EmbeddingProvider& provider,
                    const PhasePlan& plan, const TrainConfig& cfg,
                    CLMethod method, double lambda = 0.0, double fraction = 0.0);

CLResult train_sequential_naive(const Corpus& corpus,
                                const EmbeddingProvider& provider,
                                const PhasePlan& plan, const TrainConfig& cfg);

CLResult train_sequential_ewc(const Corpus& corpus,
                              const EmbeddingProvider& provider,
                              const PhasePlan& plan, const TrainConfig& cfg,
                              double lambda);

CLResult train_sequential_rehearsal(const Corpus& corpus,
                                    const EmbeddingProvider& provider,
                                    const PhasePlan& plan,
                                    const TrainConfig& cfg, double fraction);

// One row per fraction, same seeds throughout. Fraction 0 degenerates to the
// naive row. Fractions must be sorted ascending.
struct SweepRow {
  double fraction = 0.0;
  CLResult result;
};

std::vector<SweepRow> replay_sweep(const Corpus& corpus,
                                   const EmbeddingProvider& provider,
                                   const PhasePlan& plan,
                                   const TrainConfig& cfg,
                                   const std::vector<double>& fractions);

// Rehearsal at fraction 0.20 for each order. Every plan must cover the same
// universe set.
std::vector<CLResult> expansion_orders(const Corpus& corpus,
                                       const EmbeddingProvider& provider,
                                       const std::vector<PhasePlan>& orders,
                                       const TrainConfig& cfg);

}  // namespace epirouter
