#pragma once

#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <optional>
#include <span>
#include <vector>

#include "epirouter/featurize.hpp"
#include "epirouter/universe.hpp"

namespace epirouter {

struct RoutingDecision {
  std::vector<double> probabilities;  // one per registered universe, sums to 1
  UniverseId chosen;                  // argmax, ties -> lowest registry index
  double confidence = 0.0;            // max probability
};

struct TrainConfig {
  double learning_rate = 0.5;
  std::size_t epochs = 200;
  std::size_t batch_size = 32;
  double l2 = 0.0;
  std::uint64_t seed = 0;
};

// Feature vectors paired with registry label indices.
struct RouterDataset {
  std::vector<FeatureVector> x;
  std::vector<std::size_t> label;

  std::size_t size() const { return x.size(); }
};

RouterDataset make_dataset(const Corpus& corpus,
                           const EmbeddingProvider& provider,
                           std::initializer_list<Split> splits);

// Quadratic anchor on the parameters: (lambda/2) * sum_i f_i (theta_i - a_i)^2
// added to the training loss. Layout matches the router: W row-major, then b.
struct QuadraticPenalty {
  double lambda = 0.0;
  std::vector<double> fisher_w, fisher_b;
  std::vector<double> anchor_w, anchor_b;
};

// Linear-softmax classifier over feature vectors. Immutable once trained;
// prediction is safe to call concurrently.
class LinearRouter {
 public:
  LinearRouter(UniverseRegistry registry, std::size_t dim,
               FeatureSource source);

  std::size_t n_universes() const { return registry_.size(); }
  std::size_t dim() const { return dim_; }
  const UniverseRegistry& registry() const { return registry_; }
  const FeatureSource& feature_source() const { return source_; }

  // Row-major K x dim weights plus K biases.
  const std::vector<double>& weights() const { return w_; }
  const std::vector<double>& bias() const { return b_; }

  // softmax(Wx + b) with max-subtraction.
  RoutingDecision predict_probs(const FeatureVector& x) const;

  // Argmax label only; never touches a solver.
  UniverseId route_hard(const FeatureVector& x) const;

  void save(const std::filesystem::path& path) const;
  static LinearRouter load(const std::filesystem::path& path);

  friend void continue_training(LinearRouter& r, const RouterDataset& data,
                                const TrainConfig& cfg,
                                const QuadraticPenalty* penalty);

 private:
  UniverseRegistry registry_;
  std::size_t dim_;
  FeatureSource source_;
  std::vector<double> w_;  // K * dim, row-major
  std::vector<double> b_;  // K
};

// Mini-batch gradient descent on mean softmax cross-entropy plus
// (l2/2)*||W||^2. Deterministic: the epoch shuffle stream is derived from
// cfg.seed alone. Requires every registered universe to appear in the data.
LinearRouter train_router(const RouterDataset& data,
                          const UniverseRegistry& registry,
                          const TrainConfig& cfg, FeatureSource source);

// Same update rule applied to an existing router, with an optional quadratic
// penalty pulling parameters toward an anchor. Accepts data that covers only
// a subset of the universes, which train_router refuses.
void continue_training(LinearRouter& r, const RouterDataset& data,
                       const TrainConfig& cfg,
                       const QuadraticPenalty* penalty = nullptr);

// Mean of the members' probability vectors; argmax of the mean.
RoutingDecision route_ensemble(std::span<const LinearRouter* const> routers,
                               const FeatureVector& x);

struct CalibrationStats {
  std::optional<double> mean_confidence_correct;  // empty partition -> nullopt
  std::optional<double> mean_confidence_wrong;
  std::size_t n_correct = 0;
  std::size_t n_wrong = 0;
};

CalibrationStats calibration_stats(const LinearRouter& r,
                                   const RouterDataset& eval);

double accuracy(const LinearRouter& r, const RouterDataset& eval);

}  // namespace epirouter
