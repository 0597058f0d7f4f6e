#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "epirouter/corpus.hpp"
#include "epirouter/router.hpp"

namespace epirouter {

// term -> candidate replacements; terms are matched on their lowercased form
using SynonymLexicon = std::map<std::string, std::vector<std::string>>;

// universe symbol -> distractor phrases characteristic of that universe
using DistractorTable = std::map<std::string, std::vector<std::string>>;

// term -> second-language equivalent
using BilingualLexicon = std::map<std::string, std::string>;

SynonymLexicon load_synonym_lexicon(const std::filesystem::path& path);
DistractorTable load_distractor_table(const std::filesystem::path& path);
BilingualLexicon load_bilingual_lexicon(const std::filesystem::path& path);

enum class AttackKind { identity, synonym, keyword_injection, mixed_language };

std::string_view to_string(AttackKind k);
std::optional<AttackKind> attack_kind_from_string(std::string_view s);

struct AttackedQuestion {
  Question question;  // label always preserved
  bool noop = false;  // no applicable edit existed
};

// Every lexicon-matched token is replaced by a uniformly drawn synonym.
// Randomness depends only on (seed, q.id).
AttackedQuestion attack_synonym(const Question& q, const SynonymLexicon& lexicon,
                                std::uint64_t seed);

// Appends one distractor phrase drawn from a universe other than q.label.
// Throws when no wrong-universe phrases exist.
AttackedQuestion attack_keyword_injection(const Question& q,
                                          const DistractorTable& distractors,
                                          std::uint64_t seed);

// Each lexicon-matched token is independently swapped for its translation
// with probability `rate` in (0, 1].
AttackedQuestion attack_mixed_language(const Question& q,
                                       const BilingualLexicon& lexicon,
                                       double rate, std::uint64_t seed);

struct AttackSpec {
  AttackKind kind = AttackKind::identity;
  const SynonymLexicon* synonyms = nullptr;
  const DistractorTable* distractors = nullptr;
  const BilingualLexicon* bilingual = nullptr;
  double rate = 0.5;       // mixed_language only
  std::uint64_t seed = 0;
};

AttackedQuestion apply_attack(const Question& q, const AttackSpec& spec);

// Same samples with attacked text; `source` records the attack kind and seed.
Corpus attack_corpus(const Corpus& corpus, const AttackSpec& spec);

struct AttackRecord {
  std::string id;
  std::string original;
  std::string attacked;
  UniverseId pre;    // prediction on the original text
  UniverseId post;   // prediction on the attacked text
  UniverseId label;
  bool noop = false;
};

struct AsrReport {
  // flipped / pre-attack-correct; empty when no sample was correct pre-attack
  std::optional<double> asr;
  std::size_t pre_correct = 0;
  std::size_t flipped = 0;
  std::size_t total = 0;
  std::vector<AttackRecord> records;
};

AsrReport attack_success_rate(const LinearRouter& router,
                              const EmbeddingProvider& provider,
                              const Corpus& corpus, const AttackSpec& spec);

}  // namespace epirouter
