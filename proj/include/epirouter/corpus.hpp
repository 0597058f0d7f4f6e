#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "epirouter/universe.hpp"

namespace epirouter {

enum class Split { unassigned, train, val, test, unseen };

std::string_view to_string(Split s);
std::optional<Split> split_from_string(std::string_view s);

// One labeled text sample. `split == unassigned` means the record carried no
// split field and a later split_corpus call decides it.
struct Question {
  std::string id;
  std::string text;
  UniverseId label;
  Split split = Split::unassigned;
  std::string source;
};

// Immutable after construction; loading and splitting return fresh objects.
class Corpus {
 public:
  Corpus(std::vector<Question> samples, UniverseRegistry registry);

  const std::vector<Question>& samples() const { return samples_; }
  const UniverseRegistry& registry() const { return registry_; }
  std::size_t size() const { return samples_.size(); }

  std::map<Split, std::size_t> split_counts() const;
  std::size_t count_labels_present() const;

  // Samples whose label is in `universes` (all splits). Registry is shared.
  Corpus filter_by_universe(std::span<const UniverseId> universes) const;

 private:
  std::vector<Question> samples_;
  UniverseRegistry registry_;
};

// Record-per-line file, one JSON object per line with fields
// id / text / label / split (optional) / source (optional).
Corpus load_corpus(const std::filesystem::path& path,
                   UniverseRegistry registry = UniverseRegistry::standard());
Corpus load_corpus(std::istream& in, UniverseRegistry registry,
                   const std::string& origin);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);
std::string serialize_corpus(const Corpus& corpus);

struct SplitRatios {
  double train = 0.7;
  double val = 0.15;
  double test = 0.15;
};

// Stratified per universe with largest-remainder rounding; remainder ties go
// to the earlier split (train < val < test). Samples already marked `unseen`
// keep that split. Deterministic given the seed. Throws IntegrityError when
// a stratum has fewer than 3 assignable samples.
Corpus split_corpus(const Corpus& corpus, const SplitRatios& ratios,
                    std::uint64_t seed);

// --- Inclusion/exclusion criteria ------------------------------------------

// One exclusion rule: human-readable name plus the case-insensitive
// substring patterns (or "re:"-prefixed regexes) that trigger it.
struct ExclusionRule {
  std::string rule;
  std::vector<std::string> patterns;
};

struct UniverseCriteria {
  UniverseId universe;
  std::vector<std::string> include_keywords;
  std::vector<ExclusionRule> exclude_keywords;
};

class CriteriaTable {
 public:
  explicit CriteriaTable(std::vector<UniverseCriteria> entries);
  const UniverseCriteria* find(const UniverseId& u) const;
  const std::vector<UniverseCriteria>& entries() const { return entries_; }

 private:
  std::vector<UniverseCriteria> entries_;
};

CriteriaTable load_criteria(const std::filesystem::path& path);

struct Violation {
  std::string rule;
  std::string matched;  // the span of q.text that triggered the rule
};

// Reports exclusion-rule hits for the sample's own label. Never throws on
// content; a label with no criteria entry yields no violations.
std::vector<Violation> validate_sample(const Question& q,
                                       const CriteriaTable& rules);

// --- Annotation agreement ----------------------------------------------------

struct AnnotationPair {
  UniverseId annotator_a;
  UniverseId annotator_b;
};

std::vector<AnnotationPair> load_annotation_pairs(
    const std::filesystem::path& path, const UniverseRegistry& registry);

struct KappaResult {
  double observed_agreement;
  double kappa;
};

// Two-rater multi-class Cohen's kappa with chance agreement from the two
// annotators' marginal label frequencies. p_e == 1 with p_o == 1 returns 1.
KappaResult cohen_kappa(std::span<const AnnotationPair> pairs,
                        const UniverseRegistry& registry);

}  // namespace epirouter
