#include "epirouter/featurize.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "epirouter/errors.hpp"
#include "epirouter/rng.hpp"

namespace epirouter {

using nlohmann::json;

namespace {

bool is_word_byte(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') ||
         (c >= 'A' && c <= 'Z') || c >= 0x80;
}

bool is_digit(unsigned char c) { return c >= '0' && c <= '9'; }

double l2_norm(const FeatureVector& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

void l2_normalize(FeatureVector& v) {
  const double n = l2_norm(v);
  if (n > 0.0) {
    for (double& x : v) x /= n;
  }
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const unsigned char c = text[i];
    bool keep = is_word_byte(c);
    if (!keep && c == '.' && i > 0 && i + 1 < text.size() &&
        is_digit(text[i - 1]) && is_digit(text[i + 1])) {
      keep = true;  // decimal point inside a numeric literal
    }
    if (keep) {
      cur += (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a')
                                    : static_cast<char>(c);
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

// --- TF-IDF --------------------------------------------------------------

TfidfModel tfidf_fit(const Corpus& corpus, std::size_t min_df,
                     bool normalize) {
  if (min_df < 1) throw std::invalid_argument("tfidf_fit: min_df must be >= 1");
  if (corpus.size() == 0) throw std::invalid_argument("tfidf_fit: empty corpus");

  std::map<std::string, std::size_t> df;  // ordered -> sorted vocabulary
  for (const Question& q : corpus.samples()) {
    std::set<std::string> seen;
    for (std::string& t : tokenize(q.text)) seen.insert(std::move(t));
    for (const std::string& t : seen) df[t]++;
  }

  TfidfModel m;
  m.n_docs_ = corpus.size();
  m.normalize_ = normalize;
  for (auto& [term, count] : df) {
    if (count < min_df) continue;
    m.vocab_.index.emplace(term, m.vocab_.terms.size());
    m.vocab_.terms.push_back(term);
    m.vocab_.df.push_back(count);
  }
  if (m.vocab_.terms.empty()) {
    throw DataError("tfidf_fit: vocabulary is empty after min_df filtering");
  }
  m.rebuild_idf();
  return m;
}

void TfidfModel::rebuild_idf() {
  idf_.resize(vocab_.size());
  for (std::size_t i = 0; i < vocab_.size(); ++i) {
    idf_[i] = std::log((1.0 + static_cast<double>(n_docs_)) /
                       (1.0 + static_cast<double>(vocab_.df[i]))) +
              1.0;
  }
}

FeatureVector TfidfModel::embed(std::string_view text) const {
  FeatureVector v(vocab_.size(), 0.0);
  for (const std::string& t : tokenize(text)) {
    auto it = vocab_.index.find(t);
    if (it != vocab_.index.end()) v[it->second] += 1.0;
  }
  for (std::size_t i = 0; i < v.size(); ++i) v[i] *= idf_[i];
  if (normalize_) l2_normalize(v);  // all-OOV input stays the zero vector
  return v;
}

FeatureSource TfidfModel::source() const {
  std::uint64_t h = mix_seed(n_docs_, "tfidf");
  for (std::size_t i = 0; i < vocab_.size(); ++i) {
    h = mix_seed(h, vocab_.terms[i]);
    h = mix_seed(h, std::to_string(vocab_.df[i]));
  }
  h = mix_seed(h, normalize_ ? "norm" : "raw");
  return FeatureSource{"tfidf", vocab_.size(), h};
}

void TfidfModel::save(const std::filesystem::path& path) const {
  json rec;
  rec["format"] = "tfidf";
  rec["version"] = 1;
  rec["n_docs"] = n_docs_;
  rec["normalize"] = normalize_;
  rec["terms"] = vocab_.terms;
  rec["df"] = vocab_.df;
  std::ofstream out(path);
  if (!out) throw DataError("cannot write model file: " + path.string());
  out << rec.dump() << '\n';
}

TfidfModel TfidfModel::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open model file: " + path.string());
  json rec = json::parse(in, nullptr, false);
  if (rec.is_discarded() || !rec.is_object() ||
      rec.value("format", "") != "tfidf") {
    throw DataError("not a tfidf model file: " + path.string());
  }
  TfidfModel m;
  m.n_docs_ = rec.at("n_docs").get<std::size_t>();
  m.normalize_ = rec.at("normalize").get<bool>();
  m.vocab_.terms = rec.at("terms").get<std::vector<std::string>>();
  m.vocab_.df = rec.at("df").get<std::vector<std::size_t>>();
  if (m.vocab_.df.size() != m.vocab_.terms.size()) {
    throw DataError("tfidf model file is inconsistent: " + path.string());
  }
  for (std::size_t i = 0; i < m.vocab_.terms.size(); ++i) {
    m.vocab_.index.emplace(m.vocab_.terms[i], i);
  }
  m.rebuild_idf();
  return m;
}

// --- Feature hashing ------------------------------------------------------

FeatureVector hash_embed(std::string_view text, std::size_t d,
                         std::uint64_t seed) {
  if (d < 8) throw std::invalid_argument("hash_embed: dimension must be >= 8");
  FeatureVector v(d, 0.0);
  const std::vector<std::string> tokens = tokenize(text);
  auto add = [&](std::string_view feature) {
    const std::uint64_t h = mix_seed(seed, feature);
    const double sign = (h >> 63) ? -1.0 : 1.0;
    v[h % d] += sign;
  };
  for (const std::string& t : tokens) add(t);
  for (std::size_t i = 0; i + 1 < tokens.size(); ++i) {
    add(tokens[i] + ' ' + tokens[i + 1]);
  }
  l2_normalize(v);
  return v;
}

HashingProvider::HashingProvider(std::size_t d, std::uint64_t seed)
    : d_(d), seed_(seed) {
  if (d < 8) {
    throw std::invalid_argument("HashingProvider: dimension must be >= 8");
  }
}

FeatureVector HashingProvider::embed(std::string_view text) const {
  return hash_embed(text, d_, seed_);
}

FeatureSource HashingProvider::source() const {
  return FeatureSource{"hashing", d_,
                       mix_seed(seed_, "hashing:" + std::to_string(d_))};
}

}  // namespace epirouter
