#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "epirouter/corpus.hpp"

namespace epirouter {

using FeatureVector = std::vector<double>;

// Lowercased word tokens. Splits on runs of non-alphanumeric characters,
// except that '.' between two digits stays inside the token, so numeric
// literals like "0.6" survive as single tokens. Bytes >= 0x80 count as
// word characters, which keeps multi-byte UTF-8 symbols intact.
std::vector<std::string> tokenize(std::string_view text);

// Identifies the exact featurizer that produced a vector; routers refuse
// to load against a mismatched source.
struct FeatureSource {
  std::string kind;
  std::size_t dim = 0;
  std::uint64_t fingerprint = 0;

  bool operator==(const FeatureSource&) const = default;
};

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::size_t dim() const = 0;
  // Pure: same text, same vector. All entries finite.
  virtual FeatureVector embed(std::string_view text) const = 0;
  virtual FeatureSource source() const = 0;
};

struct Vocabulary {
  std::vector<std::string> terms;                       // sorted
  std::unordered_map<std::string, std::size_t> index;   // term -> position
  std::vector<std::size_t> df;                          // per-term doc count

  std::size_t size() const { return terms.size(); }
};

// Bag-of-words TF-IDF with the smoothed idf ln((1+N)/(1+df)) + 1, which is
// strictly positive for every vocabulary term.
class TfidfModel : public EmbeddingProvider {
 public:
  std::size_t dim() const override { return vocab_.size(); }
  FeatureVector embed(std::string_view text) const override;
  FeatureSource source() const override;

  const Vocabulary& vocabulary() const { return vocab_; }
  std::size_t n_docs() const { return n_docs_; }
  bool normalized() const { return normalize_; }
  double idf(std::size_t term_index) const { return idf_[term_index]; }

  void save(const std::filesystem::path& path) const;
  static TfidfModel load(const std::filesystem::path& path);

  friend TfidfModel tfidf_fit(const Corpus& corpus, std::size_t min_df,
                              bool normalize);

 private:
  TfidfModel() = default;
  void rebuild_idf();

  Vocabulary vocab_;
  std::size_t n_docs_ = 0;
  bool normalize_ = true;
  std::vector<double> idf_;
};

// Vocabulary = terms appearing in at least min_df documents, sorted
// lexicographically, so corpus order never matters.
TfidfModel tfidf_fit(const Corpus& corpus, std::size_t min_df,
                     bool normalize = true);

// Signed feature hashing of token unigrams and bigrams into d buckets,
// L2-normalized. The all-out-of-vocabulary case cannot occur here; only the
// empty token list maps to the zero vector.
FeatureVector hash_embed(std::string_view text, std::size_t d,
                         std::uint64_t seed);

class HashingProvider : public EmbeddingProvider {
 public:
  HashingProvider(std::size_t d, std::uint64_t seed);

  std::size_t dim() const override { return d_; }
  FeatureVector embed(std::string_view text) const override;
  FeatureSource source() const override;

  std::uint64_t seed() const { return seed_; }

 private:
  std::size_t d_;
  std::uint64_t seed_;
};

}  // namespace epirouter
