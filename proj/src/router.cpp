#include "epirouter/router.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "epirouter/errors.hpp"
#include "epirouter/rng.hpp"

namespace epirouter {

using nlohmann::json;

RouterDataset make_dataset(const Corpus& corpus,
                           const EmbeddingProvider& provider,
                           std::initializer_list<Split> splits) {
  RouterDataset data;
  for (const Question& q : corpus.samples()) {
    if (std::find(splits.begin(), splits.end(), q.split) == splits.end()) {
      continue;
    }
    data.x.push_back(provider.embed(q.text));
    data.label.push_back(corpus.registry().index_of(q.label));
  }
  return data;
}

LinearRouter::LinearRouter(UniverseRegistry registry, std::size_t dim,
                           FeatureSource source)
    : registry_(std::move(registry)),
      dim_(dim),
      source_(std::move(source)),
      w_(registry_.size() * dim, 0.0),
      b_(registry_.size(), 0.0) {
  if (registry_.size() == 0) {
    throw std::invalid_argument("LinearRouter: empty universe registry");
  }
}

RoutingDecision LinearRouter::predict_probs(const FeatureVector& x) const {
  if (x.size() != dim_) {
    throw std::invalid_argument("predict_probs: feature dimension mismatch");
  }
  const std::size_t k = registry_.size();
  std::vector<double> logits(b_);
  for (std::size_t u = 0; u < k; ++u) {
    const double* row = w_.data() + u * dim_;
    double dot = 0.0;
    for (std::size_t j = 0; j < dim_; ++j) dot += row[j] * x[j];
    logits[u] += dot;
  }

  const double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double& l : logits) {
    l = std::exp(l - m);
    z += l;
  }

  RoutingDecision d;
  d.probabilities.resize(k);
  std::size_t best = 0;
  for (std::size_t u = 0; u < k; ++u) {
    d.probabilities[u] = logits[u] / z;
    if (d.probabilities[u] > d.probabilities[best]) best = u;  // ties keep low index
  }
  d.chosen = registry_.at(best);
  d.confidence = d.probabilities[best];
  return d;
}

UniverseId LinearRouter::route_hard(const FeatureVector& x) const {
  return predict_probs(x).chosen;
}

namespace {

void check_config(const TrainConfig& cfg) {
  if (cfg.learning_rate <= 0) {
    throw std::invalid_argument("train: learning rate must be positive");
  }
  if (cfg.batch_size < 1) {
    throw std::invalid_argument("train: batch size must be >= 1");
  }
  if (cfg.l2 < 0) {
    throw std::invalid_argument("train: l2 penalty must be >= 0");
  }
}

}  // namespace

void continue_training(LinearRouter& r, const RouterDataset& data,
                       const TrainConfig& cfg,
                       const QuadraticPenalty* penalty) {
  check_config(cfg);
  const std::size_t n = data.size();
  const std::size_t k = r.registry_.size();
  const std::size_t dim = r.dim_;
  if (data.label.size() != n) {
    throw std::invalid_argument("train: sample/label count mismatch");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (data.x[i].size() != dim) {
      throw std::invalid_argument("train: feature dimension mismatch");
    }
    if (data.label[i] >= k) {
      throw std::invalid_argument("train: label index out of range");
    }
  }
  if (penalty != nullptr) {
    if (penalty->fisher_w.size() != r.w_.size() ||
        penalty->anchor_w.size() != r.w_.size() ||
        penalty->fisher_b.size() != r.b_.size() ||
        penalty->anchor_b.size() != r.b_.size()) {
      throw std::invalid_argument("train: penalty shape mismatch");
    }
  }
  if (n == 0 || cfg.epochs == 0) return;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(mix_seed(cfg.seed, "train"));

  std::vector<double> grad_w(k * dim), grad_b(k), probs(k);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t end = std::min(n, start + cfg.batch_size);
      const double inv = 1.0 / static_cast<double>(end - start);
      std::fill(grad_w.begin(), grad_w.end(), 0.0);
      std::fill(grad_b.begin(), grad_b.end(), 0.0);

      for (std::size_t pos = start; pos < end; ++pos) {
        const std::size_t i = order[pos];
        const FeatureVector& x = data.x[i];

        double m = -std::numeric_limits<double>::infinity();
        for (std::size_t u = 0; u < k; ++u) {
          const double* row = r.w_.data() + u * dim;
          double dot = r.b_[u];
          for (std::size_t j = 0; j < dim; ++j) dot += row[j] * x[j];
          probs[u] = dot;
          m = std::max(m, dot);
        }
        double z = 0.0;
        for (std::size_t u = 0; u < k; ++u) {
          probs[u] = std::exp(probs[u] - m);
          z += probs[u];
        }
        for (std::size_t u = 0; u < k; ++u) {
          const double g = (probs[u] / z - (u == data.label[i] ? 1.0 : 0.0)) * inv;
          grad_b[u] += g;
          double* grow = grad_w.data() + u * dim;
          for (std::size_t j = 0; j < dim; ++j) grow[j] += g * x[j];
        }
      }

      for (std::size_t p = 0; p < k * dim; ++p) {
        double g = grad_w[p] + cfg.l2 * r.w_[p];
        if (penalty != nullptr) {
          g += penalty->lambda * penalty->fisher_w[p] *
               (r.w_[p] - penalty->anchor_w[p]);
        }
        r.w_[p] -= cfg.learning_rate * g;
      }
      for (std::size_t u = 0; u < k; ++u) {
        double g = grad_b[u];
        if (penalty != nullptr) {
          g += penalty->lambda * penalty->fisher_b[u] *
               (r.b_[u] - penalty->anchor_b[u]);
        }
        r.b_[u] -= cfg.learning_rate * g;
      }
    }
  }
}

LinearRouter train_router(const RouterDataset& data,
                          const UniverseRegistry& registry,
                          const TrainConfig& cfg, FeatureSource source) {
  check_config(cfg);
  if (data.size() == 0) {
    throw std::invalid_argument("train_router: empty training set");
  }
  std::set<std::size_t> present(data.label.begin(), data.label.end());
  for (std::size_t u = 0; u < registry.size(); ++u) {
    if (!present.count(u)) {
      throw IntegrityError("train_router: universe '" +
                           registry.at(u).symbol + "' has no training samples");
    }
  }
  LinearRouter r(registry, data.x.front().size(), std::move(source));
  continue_training(r, data, cfg, nullptr);
  return r;
}

RoutingDecision route_ensemble(std::span<const LinearRouter* const> routers,
                               const FeatureVector& x) {
  if (routers.empty()) {
    throw std::invalid_argument("route_ensemble: no member routers");
  }
  const LinearRouter& first = *routers.front();
  for (const LinearRouter* r : routers) {
    if (!(r->registry() == first.registry()) || r->dim() != first.dim()) {
      throw std::invalid_argument("route_ensemble: heterogeneous members");
    }
  }
  const std::size_t k = first.n_universes();
  RoutingDecision mean;
  mean.probabilities.assign(k, 0.0);
  for (const LinearRouter* r : routers) {
    RoutingDecision d = r->predict_probs(x);
    for (std::size_t u = 0; u < k; ++u) {
      mean.probabilities[u] += d.probabilities[u];
    }
  }
  std::size_t best = 0;
  for (std::size_t u = 0; u < k; ++u) {
    mean.probabilities[u] /= static_cast<double>(routers.size());
    if (mean.probabilities[u] > mean.probabilities[best]) best = u;
  }
  mean.chosen = first.registry().at(best);
  mean.confidence = mean.probabilities[best];
  return mean;
}

CalibrationStats calibration_stats(const LinearRouter& r,
                                   const RouterDataset& eval) {
  if (eval.size() == 0) {
    throw std::invalid_argument("calibration_stats: empty evaluation set");
  }
  double sum_correct = 0.0, sum_wrong = 0.0;
  CalibrationStats s;
  for (std::size_t i = 0; i < eval.size(); ++i) {
    RoutingDecision d = r.predict_probs(eval.x[i]);
    if (r.registry().index_of(d.chosen) == eval.label[i]) {
      sum_correct += d.confidence;
      s.n_correct++;
    } else {
      sum_wrong += d.confidence;
      s.n_wrong++;
    }
  }
  if (s.n_correct > 0) {
    s.mean_confidence_correct = sum_correct / static_cast<double>(s.n_correct);
  }
  if (s.n_wrong > 0) {
    s.mean_confidence_wrong = sum_wrong / static_cast<double>(s.n_wrong);
  }
  return s;
}

double accuracy(const LinearRouter& r, const RouterDataset& eval) {
  if (eval.size() == 0) {
    throw std::invalid_argument("accuracy: empty evaluation set");
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < eval.size(); ++i) {
    if (r.registry().index_of(r.route_hard(eval.x[i])) == eval.label[i]) {
      ++hits;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(eval.size());
}

void LinearRouter::save(const std::filesystem::path& path) const {
  json rec;
  rec["format"] = "linear_router";
  rec["version"] = 1;
  json universes = json::array();
  for (const UniverseId& u : registry_.list()) universes.push_back(u.symbol);
  rec["universes"] = universes;
  rec["dim"] = dim_;
  rec["weights"] = w_;
  rec["bias"] = b_;
  rec["feature_source"] = {{"kind", source_.kind},
                           {"dim", source_.dim},
                           {"fingerprint", source_.fingerprint}};
  std::ofstream out(path);
  if (!out) throw DataError("cannot write model file: " + path.string());
  out << rec.dump() << '\n';
}

LinearRouter LinearRouter::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open model file: " + path.string());
  json rec = json::parse(in, nullptr, false);
  if (rec.is_discarded() || !rec.is_object() ||
      rec.value("format", "") != "linear_router") {
    throw DataError("not a router model file: " + path.string());
  }
  if (rec.at("version").get<int>() != 1) {
    throw DataError("unsupported router model version in " + path.string());
  }
  UniverseRegistry registry;
  for (const auto& sym : rec.at("universes")) {
    registry.register_universe(sym.get<std::string>());
  }
  FeatureSource source;
  const json& fs = rec.at("feature_source");
  source.kind = fs.at("kind").get<std::string>();
  source.dim = fs.at("dim").get<std::size_t>();
  source.fingerprint = fs.at("fingerprint").get<std::uint64_t>();

  LinearRouter r(std::move(registry), rec.at("dim").get<std::size_t>(),
                 std::move(source));
  r.w_ = rec.at("weights").get<std::vector<double>>();
  r.b_ = rec.at("bias").get<std::vector<double>>();
  if (r.w_.size() != r.registry_.size() * r.dim_ ||
      r.b_.size() != r.registry_.size()) {
    throw DataError("router model file is inconsistent: " + path.string());
  }
  return r;
}

}  // namespace epirouter
