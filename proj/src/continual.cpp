#include "epirouter/continual.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include "epirouter/errors.hpp"
#include "epirouter/rng.hpp"

namespace epirouter {

PhasePlan default_two_phase_plan() {
  return PhasePlan{{{UniverseId{kStatFreq}, UniverseId{kStatBayes},
                     UniverseId{kStatMixed}, UniverseId{kStatIllPosed},
                     UniverseId{kPhysClassical}},
                    {UniverseId{kPhysQuantum}, UniverseId{kPhysRelativity}}}};
}

std::vector<PhasePlan> default_expansion_orders() {
  PhasePlan stats_first = default_two_phase_plan();
  PhasePlan physics_first{
      {{UniverseId{kPhysClassical}, UniverseId{kPhysQuantum},
        UniverseId{kPhysRelativity}, UniverseId{kStatMixed},
        UniverseId{kStatIllPosed}},
       {UniverseId{kStatFreq}, UniverseId{kStatBayes}}}};
  PhasePlan interleaved{
      {{UniverseId{kStatFreq}, UniverseId{kStatBayes},
        UniverseId{kPhysClassical}, UniverseId{kPhysQuantum},
        UniverseId{kStatMixed}},
       {UniverseId{kStatIllPosed}, UniverseId{kPhysRelativity}}}};
  return {stats_first, physics_first, interleaved};
}

FisherDiag compute_fisher_diag(const LinearRouter& r,
                               const RouterDataset& data) {
  if (data.size() == 0) {
    throw std::invalid_argument("compute_fisher_diag: empty dataset");
  }
  const std::size_t k = r.n_universes();
  const std::size_t d = r.dim();
  FisherDiag f;
  f.w.assign(k * d, 0.0);
  f.b.assign(k, 0.0);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const RoutingDecision dec = r.predict_probs(data.x[i]);
    for (std::size_t u = 0; u < k; ++u) {
      const double g = (u == data.label[i] ? 1.0 : 0.0) - dec.probabilities[u];
      const double g2 = g * g;
      f.b[u] += g2;
      double* row = f.w.data() + u * d;
      const double* x = data.x[i].data();
      for (std::size_t j = 0; j < d; ++j) row[j] += g2 * x[j] * x[j];
    }
  }
  const double inv = 1.0 / static_cast<double>(data.size());
  for (double& v : f.w) v *= inv;
  for (double& v : f.b) v *= inv;
  return f;
}

namespace {

void validate_plan(const PhasePlan& plan, const UniverseRegistry& registry) {
  if (plan.phases.size() < 2) {
    throw std::invalid_argument("phase plan needs at least 2 phases");
  }
  std::set<std::string> seen;
  for (const auto& phase : plan.phases) {
    if (phase.empty()) {
      throw std::invalid_argument("phase plan has a phase with no universes");
    }
    for (const UniverseId& u : phase) {
      if (!registry.contains(u)) {
        throw std::invalid_argument("phase plan names unknown universe " +
                                    u.symbol);
      }
      if (!seen.insert(u.symbol).second) {
        throw std::invalid_argument("phase plan repeats universe " + u.symbol);
      }
    }
  }
}

RouterDataset dataset_for(const Corpus& corpus,
                          const EmbeddingProvider& provider,
                          const std::vector<UniverseId>& universes,
                          Split split) {
  return make_dataset(corpus.filter_by_universe(universes), provider, {split});
}

}  // namespace

std::vector<std::size_t> select_replay_indices(const RouterDataset& prior,
                                               double fraction,
                                               std::uint64_t seed,
                                               const UniverseRegistry& registry) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw std::invalid_argument(
        "select_replay_indices: fraction must lie in (0, 1]");
  }
  const std::size_t n_universes = registry.size();
  std::vector<std::vector<std::size_t>> groups(n_universes);
  for (std::size_t i = 0; i < prior.size(); ++i) {
    groups[prior.label[i]].push_back(i);
  }
  const std::size_t total = static_cast<std::size_t>(
      std::ceil(fraction * static_cast<double>(prior.size())));

  // Proportional allocation, capped by group size.
  std::vector<std::size_t> take(n_universes, 0);
  std::vector<double> frac(n_universes, 0.0);
  std::size_t assigned = 0;
  for (std::size_t u = 0; u < n_universes; ++u) {
    if (groups[u].empty()) continue;
    const double exact = fraction * static_cast<double>(groups[u].size());
    take[u] = std::min(groups[u].size(),
                       static_cast<std::size_t>(std::floor(exact)));
    frac[u] = exact - std::floor(exact);
    assigned += take[u];
  }
  std::vector<std::size_t> order;
  for (std::size_t u = 0; u < n_universes; ++u) {
    if (!groups[u].empty()) order.push_back(u);
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
  for (std::size_t r = 0; assigned < total; r = (r + 1) % order.size()) {
    const std::size_t u = order[r];
    if (take[u] < groups[u].size()) {
      take[u]++;
      assigned++;
    }
  }

  std::vector<std::size_t> picked;
  picked.reserve(total);
  for (std::size_t u = 0; u < n_universes; ++u) {
    if (take[u] == 0) continue;
    Rng rng(mix_seed(seed, "replay:" + registry.at(u).symbol));
    rng.shuffle(groups[u]);
    picked.insert(picked.end(), groups[u].begin(), groups[u].begin() + take[u]);
  }
  return picked;
}

CLRun run_continual(const Corpus& corpus, const EmbeddingProvider& provider,
                    const PhasePlan& plan, const TrainConfig& cfg,
                    CLMethod method, double lambda, double fraction) {
  const UniverseRegistry& registry = corpus.registry();
  validate_plan(plan, registry);
  if (method == CLMethod::ewc && lambda < 0.0) {
    throw std::invalid_argument("run_continual: lambda must be >= 0");
  }
  if (method == CLMethod::rehearsal && !(fraction > 0.0 && fraction <= 1.0)) {
    throw std::invalid_argument(
        "run_continual: rehearsal fraction must lie in (0, 1]");
  }

  const std::size_t n_phases = plan.phases.size();
  std::vector<RouterDataset> train(n_phases);
  for (std::size_t k = 0; k < n_phases; ++k) {
    train[k] = dataset_for(corpus, provider, plan.phases[k], Split::train);
    if (train[k].size() == 0) {
      throw IntegrityError("phase " + std::to_string(k + 1) +
                           " has no training samples");
    }
  }

  std::vector<UniverseId> old_universes, all_universes;
  for (std::size_t k = 0; k + 1 < n_phases; ++k) {
    old_universes.insert(old_universes.end(), plan.phases[k].begin(),
                         plan.phases[k].end());
  }
  all_universes = old_universes;
  all_universes.insert(all_universes.end(), plan.phases.back().begin(),
                       plan.phases.back().end());

  RouterDataset old_test = dataset_for(corpus, provider, old_universes, Split::test);
  RouterDataset new_test =
      dataset_for(corpus, provider, plan.phases.back(), Split::test);
  RouterDataset all_test = dataset_for(corpus, provider, all_universes, Split::test);
  if (old_test.size() == 0 || new_test.size() == 0) {
    throw IntegrityError("phase plan has a universe with no test samples");
  }

  LinearRouter router(registry, provider.dim(), provider.source());

  // Union of already-trained phases, for Fisher estimation and replay.
  RouterDataset prior;

  CLResult result;
  for (std::size_t k = 0; k < n_phases; ++k) {
    TrainConfig phase_cfg = cfg;
    phase_cfg.seed = mix_seed(cfg.seed, "phase:" + std::to_string(k));

    RouterDataset phase_data = train[k];
    QuadraticPenalty penalty;
    const QuadraticPenalty* penalty_ptr = nullptr;

    if (k > 0) {
      switch (method) {
        case CLMethod::naive:
          break;
        case CLMethod::ewc: {
          FisherDiag fisher = compute_fisher_diag(router, prior);
          penalty.lambda = lambda;
          penalty.fisher_w = std::move(fisher.w);
          penalty.fisher_b = std::move(fisher.b);
          penalty.anchor_w = router.weights();
          penalty.anchor_b = router.bias();
          penalty_ptr = &penalty;
          break;
        }
        case CLMethod::rehearsal: {
          for (std::size_t i : select_replay_indices(prior, fraction,
                                                     phase_cfg.seed, registry)) {
            phase_data.x.push_back(prior.x[i]);
            phase_data.label.push_back(prior.label[i]);
          }
          break;
        }
      }
    }

    continue_training(router, phase_data, phase_cfg, penalty_ptr);

    if (k + 2 == n_phases) {
      result.old_acc_before = accuracy(router, old_test);
    }
    if (k + 1 < n_phases) {
      prior.x.insert(prior.x.end(), train[k].x.begin(), train[k].x.end());
      prior.label.insert(prior.label.end(), train[k].label.begin(),
                         train[k].label.end());
    }
  }

  result.old_acc_after = accuracy(router, old_test);
  result.new_acc = accuracy(router, new_test);
  result.overall_acc = accuracy(router, all_test);
  result.forgetting = result.old_acc_before - result.old_acc_after;
  return CLRun{result, std::move(router)};
}

CLResult train_sequential_naive(const Corpus& corpus,
                                const EmbeddingProvider& provider,
                                const PhasePlan& plan, const TrainConfig& cfg) {
  return run_continual(corpus, provider, plan, cfg, CLMethod::naive).result;
}

CLResult train_sequential_ewc(const Corpus& corpus,
                              const EmbeddingProvider& provider,
                              const PhasePlan& plan, const TrainConfig& cfg,
                              double lambda) {
  if (lambda < 0.0) {
    throw std::invalid_argument("train_sequential_ewc: lambda must be >= 0");
  }
  return run_continual(corpus, provider, plan, cfg, CLMethod::ewc, lambda).result;
}

CLResult train_sequential_rehearsal(const Corpus& corpus,
                                    const EmbeddingProvider& provider,
                                    const PhasePlan& plan,
                                    const TrainConfig& cfg, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw std::invalid_argument(
        "train_sequential_rehearsal: fraction must lie in (0, 1]");
  }
  return run_continual(corpus, provider, plan, cfg, CLMethod::rehearsal, 0.0,
                      fraction)
      .result;
}

std::vector<SweepRow> replay_sweep(const Corpus& corpus,
                                   const EmbeddingProvider& provider,
                                   const PhasePlan& plan,
                                   const TrainConfig& cfg,
                                   const std::vector<double>& fractions) {
  if (!std::is_sorted(fractions.begin(), fractions.end())) {
    throw std::invalid_argument("replay_sweep: fractions must be sorted ascending");
  }
  std::vector<SweepRow> rows;
  for (double f : fractions) {
    SweepRow row;
    row.fraction = f;
    row.result = (f == 0.0)
                     ? train_sequential_naive(corpus, provider, plan, cfg)
                     : train_sequential_rehearsal(corpus, provider, plan, cfg, f);
    rows.push_back(row);
  }
  return rows;
}

std::vector<CLResult> expansion_orders(const Corpus& corpus,
                                       const EmbeddingProvider& provider,
                                       const std::vector<PhasePlan>& orders,
                                       const TrainConfig& cfg) {
  if (orders.empty()) {
    throw std::invalid_argument("expansion_orders: no plans given");
  }
  auto coverage = [](const PhasePlan& plan) {
    std::set<std::string> s;
    for (const auto& phase : plan.phases) {
      for (const UniverseId& u : phase) s.insert(u.symbol);
    }
    return s;
  };
  const std::set<std::string> expected = coverage(orders.front());
  for (const PhasePlan& plan : orders) {
    if (coverage(plan) != expected) {
      throw std::invalid_argument(
          "expansion_orders: plans cover different universe sets");
    }
  }
  std::vector<CLResult> results;
  for (const PhasePlan& plan : orders) {
    results.push_back(
        train_sequential_rehearsal(corpus, provider, plan, cfg, 0.20));
  }
  return results;
}

}  // namespace epirouter
