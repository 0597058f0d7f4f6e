#include "epirouter/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "epirouter/rng.hpp"

namespace epirouter {

using nlohmann::json;

std::string_view to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
    case Split::unseen: return "unseen";
    case Split::unassigned: break;
  }
  return "unassigned";
}

std::optional<Split> split_from_string(std::string_view s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  if (s == "unseen") return Split::unseen;
  if (s == "unassigned") return Split::unassigned;
  return std::nullopt;
}

namespace {

bool is_blank(const std::string& line) {
  return std::all_of(line.begin(), line.end(),
                     [](unsigned char c) { return std::isspace(c); });
}

std::string trimmed(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

json parse_record_line(const std::string& line, std::size_t lineno) {
  json rec = json::parse(line, nullptr, false);
  if (rec.is_discarded() || !rec.is_object()) {
    throw ParseError("record is not a JSON object", lineno);
  }
  return rec;
}

std::string require_string(const json& rec, const char* key,
                           std::size_t lineno) {
  if (!rec.contains(key)) {
    throw ParseError(std::string("missing field '") + key + "'", lineno);
  }
  if (!rec[key].is_string()) {
    throw ParseError(std::string("field '") + key + "' must be a string",
                     lineno);
  }
  return rec[key].get<std::string>();
}

}  // namespace

Corpus::Corpus(std::vector<Question> samples, UniverseRegistry registry)
    : samples_(std::move(samples)), registry_(std::move(registry)) {
  std::set<std::string> seen;
  for (const Question& q : samples_) {
    if (trimmed(q.text).empty()) {
      throw IntegrityError("sample '" + q.id + "' has empty text");
    }
    if (!registry_.contains(q.label)) {
      throw RegistryError("sample '" + q.id + "' has unregistered label '" +
                          q.label.symbol + "'");
    }
    if (!seen.insert(q.id).second) {
      throw IntegrityError("duplicate sample id '" + q.id + "'");
    }
  }
}

std::map<Split, std::size_t> Corpus::split_counts() const {
  std::map<Split, std::size_t> counts;
  for (const Question& q : samples_) counts[q.split]++;
  return counts;
}

std::size_t Corpus::count_labels_present() const {
  std::set<std::string> labels;
  for (const Question& q : samples_) labels.insert(q.label.symbol);
  return labels.size();
}

Corpus Corpus::filter_by_universe(std::span<const UniverseId> universes) const {
  std::set<std::string> keep;
  for (const UniverseId& u : universes) keep.insert(u.symbol);
  std::vector<Question> subset;
  for (const Question& q : samples_) {
    if (keep.count(q.label.symbol)) subset.push_back(q);
  }
  return Corpus(std::move(subset), registry_);
}

Corpus load_corpus(std::istream& in, UniverseRegistry registry,
                   const std::string& origin) {
  std::vector<Question> samples;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (is_blank(line)) continue;
    json rec = parse_record_line(line, lineno);

    Question q;
    q.id = require_string(rec, "id", lineno);
    q.text = require_string(rec, "text", lineno);
    q.label = UniverseId{require_string(rec, "label", lineno)};
    if (trimmed(q.text).empty()) {
      throw ParseError("field 'text' is empty", lineno);
    }
    if (!registry.contains(q.label)) {
      throw RegistryError(origin + " line " + std::to_string(lineno) +
                          ": unknown universe symbol '" + q.label.symbol +
                          "'");
    }
    if (rec.contains("split")) {
      auto s = split_from_string(require_string(rec, "split", lineno));
      if (!s) throw ParseError("unknown split value", lineno);
      q.split = *s;
    }
    if (rec.contains("source")) {
      q.source = require_string(rec, "source", lineno);
    }
    samples.push_back(std::move(q));
  }
  return Corpus(std::move(samples), std::move(registry));
}

Corpus load_corpus(const std::filesystem::path& path,
                   UniverseRegistry registry) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("cannot open corpus file: " + path.string());
  }
  return load_corpus(in, std::move(registry), path.string());
}

std::string serialize_corpus(const Corpus& corpus) {
  std::string out;
  for (const Question& q : corpus.samples()) {
    json rec;
    rec["id"] = q.id;
    rec["text"] = q.text;
    rec["label"] = q.label.symbol;
    if (q.split != Split::unassigned) rec["split"] = to_string(q.split);
    if (!q.source.empty()) rec["source"] = q.source;
    out += rec.dump();
    out += '\n';
  }
  return out;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw DataError("cannot write corpus file: " + path.string());
  }
  out << serialize_corpus(corpus);
}

Corpus split_corpus(const Corpus& corpus, const SplitRatios& ratios,
                    std::uint64_t seed) {
  if (ratios.train <= 0 || ratios.val <= 0 || ratios.test <= 0) {
    throw std::invalid_argument("split ratios must be positive");
  }
  if (std::fabs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9) {
    throw std::invalid_argument("split ratios must sum to 1");
  }

  std::vector<Question> samples = corpus.samples();

  // Gather assignable sample indices per universe, in corpus order.
  std::map<std::string, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].split == Split::unseen) continue;
    strata[samples[i].label.symbol].push_back(i);
  }

  const double ratio[3] = {ratios.train, ratios.val, ratios.test};
  const Split split_of[3] = {Split::train, Split::val, Split::test};

  for (auto& [symbol, members] : strata) {
    const std::size_t n = members.size();
    if (n < 3) {
      throw IntegrityError("universe '" + symbol + "' has only " +
                           std::to_string(n) +
                           " assignable samples; need at least 3 to stratify");
    }

    // Largest-remainder allocation; ties favour the earlier split.
    std::size_t counts[3];
    double frac[3];
    std::size_t assigned = 0;
    for (int k = 0; k < 3; ++k) {
      double exact = static_cast<double>(n) * ratio[k];
      counts[k] = static_cast<std::size_t>(std::floor(exact + 1e-12));
      frac[k] = exact - static_cast<double>(counts[k]);
      assigned += counts[k];
    }
    int order[3] = {0, 1, 2};
    std::stable_sort(order, order + 3,
                     [&](int a, int b) { return frac[a] > frac[b]; });
    for (std::size_t r = 0; assigned < n; ++r, ++assigned) counts[order[r % 3]]++;

    Rng rng(mix_seed(seed, "split:" + symbol));
    rng.shuffle(members);

    std::size_t pos = 0;
    for (int k = 0; k < 3; ++k) {
      for (std::size_t j = 0; j < counts[k]; ++j) {
        samples[members[pos++]].split = split_of[k];
      }
    }
  }

  return Corpus(std::move(samples), corpus.registry());
}

// --- Criteria ----------------------------------------------------------------

CriteriaTable::CriteriaTable(std::vector<UniverseCriteria> entries)
    : entries_(std::move(entries)) {}

const UniverseCriteria* CriteriaTable::find(const UniverseId& u) const {
  for (const auto& e : entries_) {
    if (e.universe == u) return &e;
  }
  return nullptr;
}

CriteriaTable load_criteria(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("cannot open criteria file: " + path.string());
  }
  std::vector<UniverseCriteria> entries;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (is_blank(line)) continue;
    json rec = parse_record_line(line, lineno);
    UniverseCriteria c;
    c.universe = UniverseId{require_string(rec, "universe", lineno)};
    if (rec.contains("include_keywords")) {
      for (const auto& k : rec["include_keywords"]) {
        c.include_keywords.push_back(k.get<std::string>());
      }
    }
    if (rec.contains("exclude_keywords")) {
      for (const auto& r : rec["exclude_keywords"]) {
        ExclusionRule rule;
        rule.rule = r.at("rule").get<std::string>();
        for (const auto& p : r.at("patterns")) {
          rule.patterns.push_back(p.get<std::string>());
        }
        c.exclude_keywords.push_back(std::move(rule));
      }
    }
    entries.push_back(std::move(c));
  }
  return CriteriaTable(std::move(entries));
}

namespace {

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

// Case-insensitive substring search; returns the matched span of `text`.
std::optional<std::string> find_keyword(const std::string& text,
                                        const std::string& pattern) {
  if (pattern.empty()) return std::nullopt;
  std::string lt = ascii_lower(text);
  std::string lp = ascii_lower(pattern);
  auto pos = lt.find(lp);
  if (pos == std::string::npos) return std::nullopt;
  return text.substr(pos, lp.size());
}

}  // namespace

std::vector<Violation> validate_sample(const Question& q,
                                       const CriteriaTable& rules) {
  std::vector<Violation> violations;
  const UniverseCriteria* c = rules.find(q.label);
  if (c == nullptr) return violations;

  for (const ExclusionRule& rule : c->exclude_keywords) {
    for (const std::string& pattern : rule.patterns) {
      std::optional<std::string> hit;
      if (pattern.rfind("re:", 0) == 0) {
        std::regex re(pattern.substr(3),
                      std::regex::ECMAScript | std::regex::icase);
        std::smatch m;
        if (std::regex_search(q.text, m, re)) hit = m.str();
      } else {
        hit = find_keyword(q.text, pattern);
      }
      if (hit) {
        violations.push_back(Violation{rule.rule, *hit});
        break;  // one violation per triggered rule
      }
    }
  }
  return violations;
}

// --- Annotation agreement ------------------------------------------------------

std::vector<AnnotationPair> load_annotation_pairs(
    const std::filesystem::path& path, const UniverseRegistry& registry) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("cannot open annotation file: " + path.string());
  }
  std::vector<AnnotationPair> pairs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (is_blank(line)) continue;
    json rec = parse_record_line(line, lineno);
    AnnotationPair p;
    p.annotator_a = UniverseId{require_string(rec, "a", lineno)};
    p.annotator_b = UniverseId{require_string(rec, "b", lineno)};
    if (!registry.contains(p.annotator_a) ||
        !registry.contains(p.annotator_b)) {
      throw RegistryError("line " + std::to_string(lineno) +
                          ": unregistered annotation label");
    }
    pairs.push_back(std::move(p));
  }
  return pairs;
}

KappaResult cohen_kappa(std::span<const AnnotationPair> pairs,
                        const UniverseRegistry& registry) {
  if (pairs.empty()) {
    throw std::invalid_argument("cohen_kappa: no annotation pairs");
  }
  const std::size_t k = registry.size();
  std::vector<double> freq_a(k, 0.0), freq_b(k, 0.0);
  double agree = 0.0;
  for (const AnnotationPair& p : pairs) {
    freq_a[registry.index_of(p.annotator_a)] += 1.0;
    freq_b[registry.index_of(p.annotator_b)] += 1.0;
    if (p.annotator_a == p.annotator_b) agree += 1.0;
  }
  const double n = static_cast<double>(pairs.size());
  const double p_o = agree / n;
  double p_e = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    p_e += (freq_a[i] / n) * (freq_b[i] / n);
  }
  // p_e == 1 forces p_o == 1 (both raters constant on the same label).
  if (p_e >= 1.0 - 1e-15) {
    return KappaResult{p_o, 1.0};
  }
  return KappaResult{p_o, (p_o - p_e) / (1.0 - p_e)};
}

}  // namespace epirouter
