#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>

#include "epirouter/continual.hpp"
#include "epirouter/featurize.hpp"
#include "epirouter/rng.hpp"

using namespace epirouter;

namespace {

// Reads the question text itself as a feature vector, so tests control the
// geometry exactly.
class VecProvider : public EmbeddingProvider {
 public:
  explicit VecProvider(std::size_t dim) : dim_(dim) {}
  std::size_t dim() const override { return dim_; }
  FeatureVector embed(std::string_view text) const override {
    std::istringstream in{std::string(text)};
    FeatureVector v;
    double x = 0.0;
    while (in >> x) v.push_back(x);
    v.resize(dim_, 0.0);
    return v;
  }
  FeatureSource source() const override {
    return FeatureSource{"test-vec", dim_, 0};
  }

 private:
  std::size_t dim_;
};

UniverseRegistry four_universes() {
  UniverseRegistry reg;
  for (const char* s : {"U_A", "U_B", "U_C", "U_D"}) reg.register_universe(s);
  return reg;
}

std::string vec_text(double a, double b, double c, double d) {
  std::ostringstream out;
  out << a << ' ' << b << ' ' << c << ' ' << d;
  return out.str();
}

// Four well-separated clusters. The later universes overlap the earlier
// feature dimensions, so untreated sequential training overwrites them.
Corpus cluster_corpus() {
  UniverseRegistry reg = four_universes();
  std::vector<Question> samples;
  auto add = [&](const char* label, int i, Split split) {
    const double j = 1.0 + 0.02 * i;  // keeps texts distinct within a class
    Question q;
    q.label = UniverseId{label};
    q.split = split;
    q.id = std::string(label) + ":" + std::string(to_string(split)) + ":" +
           std::to_string(i);
    if (q.label == UniverseId{"U_A"}) q.text = vec_text(j, 0, 0, 0);
    if (q.label == UniverseId{"U_B"}) q.text = vec_text(0, j, 0, 0);
    if (q.label == UniverseId{"U_C"}) q.text = vec_text(1, 0, j, 0);
    if (q.label == UniverseId{"U_D"}) q.text = vec_text(0, 1, 0, j);
    samples.push_back(std::move(q));
  };
  for (const char* label : {"U_A", "U_B", "U_C", "U_D"}) {
    for (int i = 0; i < 6; ++i) add(label, i, Split::train);
    for (int i = 0; i < 4; ++i) add(label, 10 + i, Split::test);
  }
  return Corpus(samples, reg);
}

PhasePlan two_phases() {
  return PhasePlan{{{UniverseId{"U_A"}, UniverseId{"U_B"}},
                    {UniverseId{"U_C"}, UniverseId{"U_D"}}}};
}

TrainConfig cl_config() {
  TrainConfig cfg;
  cfg.learning_rate = 0.3;
  cfg.epochs = 300;
  cfg.batch_size = 32;
  cfg.seed = 5;
  return cfg;
}

}  // namespace

TEST_CASE("replay selection is stratified, exact and deterministic") {
  UniverseRegistry reg = four_universes();
  RouterDataset prior;
  for (int i = 0; i < 10; ++i) {
    prior.x.push_back({1, 0, 0, 0});
    prior.label.push_back(0);
  }
  for (int i = 0; i < 5; ++i) {
    prior.x.push_back({0, 1, 0, 0});
    prior.label.push_back(1);
  }

  auto idx = select_replay_indices(prior, 0.2, 7, reg);
  REQUIRE(idx.size() == 3);  // ceil(0.2 * 15)
  std::set<std::size_t> unique(idx.begin(), idx.end());
  CHECK(unique.size() == idx.size());
  std::size_t from_first = 0;
  for (std::size_t i : idx) {
    REQUIRE(i < prior.size());
    if (prior.label[i] == 0) ++from_first;
  }
  CHECK(from_first == 2);  // 3 * 10/15 and 3 * 5/15 are both integral

  CHECK(select_replay_indices(prior, 0.2, 7, reg) == idx);

  auto all = select_replay_indices(prior, 1.0, 7, reg);
  std::sort(all.begin(), all.end());
  REQUIRE(all.size() == prior.size());
  for (std::size_t i = 0; i < all.size(); ++i) CHECK(all[i] == i);

  CHECK_THROWS_AS(select_replay_indices(prior, 0.0, 7, reg),
                  std::invalid_argument);
  CHECK_THROWS_AS(select_replay_indices(prior, 1.5, 7, reg),
                  std::invalid_argument);
}

TEST_CASE("fisher diagonal of the zero router has a closed form") {
  UniverseRegistry reg;
  reg.register_universe("U_A");
  reg.register_universe("U_B");
  LinearRouter r(reg, 2, FeatureSource{"test-vec", 2, 0});

  RouterDataset data;
  data.x = {{1.0, 0.0}};
  data.label = {0};

  // probabilities are (1/2, 1/2); gradients are +-1/2 on the active input
  FisherDiag f = compute_fisher_diag(r, data);
  REQUIRE(f.w.size() == 4);
  REQUIRE(f.b.size() == 2);
  CHECK(f.w[0] == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(f.w[1] == 0.0);
  CHECK(f.w[2] == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(f.w[3] == 0.0);
  CHECK(f.b[0] == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(f.b[1] == doctest::Approx(0.25).epsilon(1e-15));

  CHECK_THROWS_AS(compute_fisher_diag(r, RouterDataset{}),
                  std::invalid_argument);
}

TEST_CASE("fisher entries are nonnegative and zero on silent features") {
  Corpus corpus = cluster_corpus();
  VecProvider provider(4);
  RouterDataset data = make_dataset(corpus, provider, {Split::train});
  TrainConfig cfg = cl_config();
  LinearRouter r = train_router(data, corpus.registry(), cfg,
                                provider.source());

  // restrict to the first cluster: only feature 0 is ever active
  RouterDataset only_a;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.label[i] == 0) {
      only_a.x.push_back(data.x[i]);
      only_a.label.push_back(data.label[i]);
    }
  }
  FisherDiag f = compute_fisher_diag(r, only_a);
  for (double v : f.w) CHECK(v >= 0.0);
  for (double v : f.b) CHECK(v >= 0.0);
  for (std::size_t u = 0; u < 4; ++u) {
    CHECK(f.w[u * 4 + 1] == 0.0);
    CHECK(f.w[u * 4 + 2] == 0.0);
    CHECK(f.w[u * 4 + 3] == 0.0);
  }
}

TEST_CASE("quadratic penalty pins the parameters it weights") {
  UniverseRegistry reg;
  reg.register_universe("U_A");
  reg.register_universe("U_B");

  RouterDataset data;
  data.x = {{1.0, 0.0}, {0.0, 1.0}};
  data.label = {0, 1};

  TrainConfig cfg;
  cfg.learning_rate = 0.01;
  cfg.epochs = 400;
  cfg.batch_size = 32;
  cfg.seed = 1;

  LinearRouter pinned(reg, 2, FeatureSource{"test-vec", 2, 0});
  QuadraticPenalty penalty;
  penalty.lambda = 1.0;
  penalty.fisher_w = {100.0, 0.0, 0.0, 0.0};  // hold w[U_A][0] near zero
  penalty.fisher_b = {0.0, 0.0};
  penalty.anchor_w = {0.0, 0.0, 0.0, 0.0};
  penalty.anchor_b = {0.0, 0.0};
  continue_training(pinned, data, cfg, &penalty);

  LinearRouter free(reg, 2, FeatureSource{"test-vec", 2, 0});
  continue_training(free, data, cfg);

  CHECK(std::fabs(pinned.weights()[0]) < 0.05);
  CHECK(free.weights()[0] > 0.2);
}

TEST_CASE("null penalty and zero-strength penalty train identically") {
  UniverseRegistry reg;
  reg.register_universe("U_A");
  reg.register_universe("U_B");
  RouterDataset data;
  data.x = {{1.0, 0.3}, {0.2, 1.0}};
  data.label = {0, 1};
  TrainConfig cfg = cl_config();
  cfg.epochs = 50;

  LinearRouter plain(reg, 2, FeatureSource{"test-vec", 2, 0});
  continue_training(plain, data, cfg);

  LinearRouter zeroed(reg, 2, FeatureSource{"test-vec", 2, 0});
  QuadraticPenalty penalty;
  penalty.lambda = 0.0;
  penalty.fisher_w = {5.0, 5.0, 5.0, 5.0};
  penalty.fisher_b = {5.0, 5.0};
  penalty.anchor_w = {1.0, 1.0, 1.0, 1.0};
  penalty.anchor_b = {1.0, 1.0};
  continue_training(zeroed, data, cfg, &penalty);

  CHECK(plain.weights() == zeroed.weights());  // bitwise
  CHECK(plain.bias() == zeroed.bias());
}

TEST_CASE("sequential training without protection forgets the old universes") {
  Corpus corpus = cluster_corpus();
  VecProvider provider(4);
  CLResult naive = train_sequential_naive(corpus, provider, two_phases(),
                                          cl_config());
  CHECK(naive.old_acc_before >= 0.9);
  CHECK(naive.new_acc >= 0.9);
  CHECK(naive.forgetting >= 0.3);
  CHECK(naive.forgetting ==
        doctest::Approx(naive.old_acc_before - naive.old_acc_after)
            .epsilon(1e-15));
}

TEST_CASE("rehearsal holds old accuracy while learning the new universes") {
  Corpus corpus = cluster_corpus();
  VecProvider provider(4);
  CLResult replay = train_sequential_rehearsal(corpus, provider, two_phases(),
                                               cl_config(), 0.10);
  CHECK(replay.old_acc_before >= 0.9);
  CHECK(replay.new_acc >= 0.9);
  CHECK(replay.forgetting <= 0.05);
  CHECK(replay.overall_acc >= 0.9);

  CHECK_THROWS_AS(train_sequential_rehearsal(corpus, provider, two_phases(),
                                             cl_config(), 0.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(train_sequential_rehearsal(corpus, provider, two_phases(),
                                             cl_config(), 1.0001),
                  std::invalid_argument);
}

TEST_CASE("zero-strength weight protection reproduces plain sequential training") {
  Corpus corpus = cluster_corpus();
  VecProvider provider(4);
  CLRun naive = run_continual(corpus, provider, two_phases(), cl_config(),
                              CLMethod::naive);
  CLRun ewc0 = run_continual(corpus, provider, two_phases(), cl_config(),
                             CLMethod::ewc, 0.0);
  CHECK(naive.router.weights() == ewc0.router.weights());  // bitwise
  CHECK(naive.router.bias() == ewc0.router.bias());
  CHECK(naive.result.forgetting == ewc0.result.forgetting);
  CHECK(naive.result.overall_acc == ewc0.result.overall_acc);

  CHECK_THROWS_AS(run_continual(corpus, provider, two_phases(), cl_config(),
                                CLMethod::ewc, -1.0),
                  std::invalid_argument);
}

TEST_CASE("full rehearsal approaches joint training") {
  Corpus corpus = cluster_corpus();
  VecProvider provider(4);
  CLResult full = train_sequential_rehearsal(corpus, provider, two_phases(),
                                             cl_config(), 1.0);

  TrainConfig cfg = cl_config();
  RouterDataset all = make_dataset(corpus, provider, {Split::train});
  LinearRouter joint = train_router(all, corpus.registry(), cfg,
                                    provider.source());
  RouterDataset test = make_dataset(corpus, provider, {Split::test});
  CHECK(std::fabs(full.overall_acc - accuracy(joint, test)) <= 0.02);
}

TEST_CASE("continual runs are reproducible") {
  Corpus corpus = cluster_corpus();
  VecProvider provider(4);
  CLRun a = run_continual(corpus, provider, two_phases(), cl_config(),
                          CLMethod::rehearsal, 0.0, 0.25);
  CLRun b = run_continual(corpus, provider, two_phases(), cl_config(),
                          CLMethod::rehearsal, 0.0, 0.25);
  CHECK(a.router.weights() == b.router.weights());
  CHECK(a.result.forgetting == b.result.forgetting);
}

TEST_CASE("replay sweep starts from the naive row") {
  Corpus corpus = cluster_corpus();
  VecProvider provider(4);
  auto rows = replay_sweep(corpus, provider, two_phases(), cl_config(),
                           {0.0, 0.25});
  REQUIRE(rows.size() == 2);
  CLResult naive = train_sequential_naive(corpus, provider, two_phases(),
                                          cl_config());
  CHECK(rows[0].fraction == 0.0);
  CHECK(rows[0].result.forgetting == naive.forgetting);
  CHECK(rows[0].result.overall_acc == naive.overall_acc);
  CHECK(rows[1].result.forgetting <= rows[0].result.forgetting);

  CHECK_THROWS_AS(replay_sweep(corpus, provider, two_phases(), cl_config(),
                               {0.25, 0.0}),
                  std::invalid_argument);
}

TEST_CASE("curriculum comparison requires matching universe coverage") {
  Corpus corpus = cluster_corpus();
  VecProvider provider(4);
  PhasePlan forward = two_phases();
  PhasePlan backward{{{UniverseId{"U_C"}, UniverseId{"U_D"}},
                      {UniverseId{"U_A"}, UniverseId{"U_B"}}}};
  auto results = expansion_orders(corpus, provider, {forward, backward},
                                  cl_config());
  REQUIRE(results.size() == 2);
  for (const CLResult& r : results) {
    CHECK(r.new_acc >= 0.9);
    CHECK(r.forgetting <= 0.2);  // both orders run with rehearsal
  }

  PhasePlan partial{{{UniverseId{"U_A"}}, {UniverseId{"U_B"}}}};
  CHECK_THROWS_AS(expansion_orders(corpus, provider, {forward, partial},
                                   cl_config()),
                  std::invalid_argument);
  CHECK_THROWS_AS(expansion_orders(corpus, provider, {}, cl_config()),
                  std::invalid_argument);
}

TEST_CASE("bundled curricula cover all universes in two phases") {
  PhasePlan base = default_two_phase_plan();
  REQUIRE(base.phases.size() == 2);
  std::vector<PhasePlan> orders = default_expansion_orders();
  REQUIRE(orders.size() == 3);
  UniverseRegistry standard = UniverseRegistry::standard();
  std::set<std::string> want;
  for (const UniverseId& u : standard.list()) {
    want.insert(u.symbol);
  }
  for (const PhasePlan& plan : orders) {
    CHECK(plan.phases.size() == 2);
    std::set<std::string> got;
    for (const auto& phase : plan.phases) {
      for (const UniverseId& u : phase) got.insert(u.symbol);
    }
    CHECK(got == want);
  }
  // the first bundled order is the default schedule
  CHECK(orders[0].phases == base.phases);
}

TEST_CASE("phase plans are validated against the corpus") {
  Corpus corpus = cluster_corpus();
  VecProvider provider(4);
  TrainConfig cfg = cl_config();

  PhasePlan single{{{UniverseId{"U_A"}, UniverseId{"U_B"}}}};
  CHECK_THROWS_AS(run_continual(corpus, provider, single, cfg, CLMethod::naive),
                  std::invalid_argument);

  PhasePlan empty_phase{{{UniverseId{"U_A"}}, {}}};
  CHECK_THROWS_AS(
      run_continual(corpus, provider, empty_phase, cfg, CLMethod::naive),
      std::invalid_argument);

  PhasePlan repeated{{{UniverseId{"U_A"}, UniverseId{"U_B"}},
                      {UniverseId{"U_B"}, UniverseId{"U_C"}}}};
  CHECK_THROWS_AS(
      run_continual(corpus, provider, repeated, cfg, CLMethod::naive),
      std::invalid_argument);

  PhasePlan unknown{{{UniverseId{"U_A"}}, {UniverseId{"U_X"}}}};
  CHECK_THROWS_AS(
      run_continual(corpus, provider, unknown, cfg, CLMethod::naive),
      std::invalid_argument);
}

TEST_CASE("phases without data are rejected") {
  UniverseRegistry reg = four_universes();
  std::vector<Question> samples;
  auto add = [&](const char* label, int i, Split split, std::string text) {
    Question q;
    q.label = UniverseId{label};
    q.split = split;
    q.id = std::string(label) + std::to_string(i) + std::string(to_string(split));
    q.text = std::move(text);
    samples.push_back(std::move(q));
  };
  for (int i = 0; i < 4; ++i) {
    add("U_A", i, Split::train, vec_text(1 + 0.1 * i, 0, 0, 0));
    add("U_B", i, Split::train, vec_text(0, 1 + 0.1 * i, 0, 0));
    add("U_C", i, Split::train, vec_text(0, 0, 1 + 0.1 * i, 0));
    add("U_A", 10 + i, Split::test, vec_text(1 + 0.01 * i, 0, 0, 0));
    add("U_C", 10 + i, Split::test, vec_text(0, 0, 1 + 0.01 * i, 0));
  }
  // U_D never appears in the train split, so a phase made of it is empty
  Corpus corpus(samples, reg);
  VecProvider provider(4);
  PhasePlan plan{{{UniverseId{"U_A"}, UniverseId{"U_B"}}, {UniverseId{"U_D"}}}};
  CHECK_THROWS_AS(
      run_continual(corpus, provider, plan, cl_config(), CLMethod::naive),
      IntegrityError);

  // U_B has train data but no test rows, so the old-universe score is empty
  PhasePlan ab_c{{{UniverseId{"U_B"}}, {UniverseId{"U_C"}}}};
  CHECK_THROWS_AS(
      run_continual(corpus, provider, ab_c, cl_config(), CLMethod::naive),
      IntegrityError);
}

TEST_CASE("retraining on the same data does not lose accuracy") {
  Corpus corpus = cluster_corpus();
  VecProvider provider(4);
  RouterDataset data = make_dataset(corpus, provider, {Split::train});
  TrainConfig cfg = cl_config();
  LinearRouter r = train_router(data, corpus.registry(), cfg,
                                provider.source());
  const double first = accuracy(r, data);
  continue_training(r, data, cfg);
  CHECK(accuracy(r, data) >= first);
}
