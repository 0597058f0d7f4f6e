#include "epirouter/attacks.hpp"

#include <fstream>
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

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

// Rewrites each maximal word-character run through `replace`; everything
// between runs is copied verbatim, so punctuation and spacing survive.
template <typename F>
std::string map_words(const std::string& text, F&& replace) {
  std::string out;
  std::size_t i = 0;
  while (i < text.size()) {
    if (!is_word_byte(text[i])) {
      out += text[i++];
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && is_word_byte(text[j])) ++j;
    out += replace(text.substr(i, j - i));
    i = j;
  }
  return out;
}

json parse_line(const std::string& line, std::size_t lineno) {
  json rec = json::parse(line, nullptr, false);
  if (rec.is_discarded() || !rec.is_object()) {
    throw ParseError("record is not a JSON object", lineno);
  }
  return rec;
}

template <typename F>
void for_each_record(const std::filesystem::path& path, F&& f) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open lexicon file: " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    f(parse_line(line, lineno), lineno);
  }
}

}  // namespace

SynonymLexicon load_synonym_lexicon(const std::filesystem::path& path) {
  SynonymLexicon lex;
  for_each_record(path, [&](const json& rec, std::size_t lineno) {
    const std::string term = ascii_lower(rec.at("term").get<std::string>());
    auto synonyms = rec.at("synonyms").get<std::vector<std::string>>();
    if (synonyms.empty()) throw ParseError("empty synonym list", lineno);
    lex[term] = std::move(synonyms);
  });
  return lex;
}

DistractorTable load_distractor_table(const std::filesystem::path& path) {
  DistractorTable table;
  for_each_record(path, [&](const json& rec, std::size_t lineno) {
    const std::string universe = rec.at("universe").get<std::string>();
    auto phrases = rec.at("phrases").get<std::vector<std::string>>();
    if (phrases.empty()) throw ParseError("empty phrase list", lineno);
    table[universe] = std::move(phrases);
  });
  return table;
}

BilingualLexicon load_bilingual_lexicon(const std::filesystem::path& path) {
  BilingualLexicon lex;
  for_each_record(path, [&](const json& rec, std::size_t) {
    lex[ascii_lower(rec.at("term").get<std::string>())] =
        rec.at("replacement").get<std::string>();
  });
  return lex;
}

std::string_view to_string(AttackKind k) {
  switch (k) {
    case AttackKind::identity: return "identity";
    case AttackKind::synonym: return "synonym";
    case AttackKind::keyword_injection: return "keyword_injection";
    case AttackKind::mixed_language: return "mixed_language";
  }
  return "identity";
}

std::optional<AttackKind> attack_kind_from_string(std::string_view s) {
  if (s == "identity") return AttackKind::identity;
  if (s == "synonym") return AttackKind::synonym;
  if (s == "keyword_injection") return AttackKind::keyword_injection;
  if (s == "mixed_language") return AttackKind::mixed_language;
  return std::nullopt;
}

AttackedQuestion attack_synonym(const Question& q,
                                const SynonymLexicon& lexicon,
                                std::uint64_t seed) {
  Rng rng(mix_seed(seed, "synonym:" + q.id));
  bool changed = false;
  AttackedQuestion out{q, false};
  out.question.text = map_words(q.text, [&](std::string word) {
    auto it = lexicon.find(ascii_lower(word));
    if (it == lexicon.end()) return word;
    changed = true;
    return it->second[rng.below(it->second.size())];
  });
  out.noop = !changed;
  return out;
}

AttackedQuestion attack_keyword_injection(const Question& q,
                                          const DistractorTable& distractors,
                                          std::uint64_t seed) {
  std::vector<const std::string*> candidates;
  for (const auto& [universe, phrases] : distractors) {
    if (universe == q.label.symbol) continue;
    for (const std::string& p : phrases) candidates.push_back(&p);
  }
  if (candidates.empty()) {
    throw DataError("attack_keyword_injection: no distractor phrases outside "
                    "universe " + q.label.symbol);
  }
  Rng rng(mix_seed(seed, "inject:" + q.id));
  AttackedQuestion out{q, false};
  out.question.text = q.text + ' ' + *candidates[rng.below(candidates.size())];
  return out;
}

AttackedQuestion attack_mixed_language(const Question& q,
                                       const BilingualLexicon& lexicon,
                                       double rate, std::uint64_t seed) {
  if (!(rate > 0.0 && rate <= 1.0)) {
    throw std::invalid_argument("attack_mixed_language: rate must lie in (0, 1]");
  }
  Rng rng(mix_seed(seed, "mixed:" + q.id));
  bool changed = false;
  AttackedQuestion out{q, false};
  out.question.text = map_words(q.text, [&](std::string word) {
    auto it = lexicon.find(ascii_lower(word));
    if (it == lexicon.end()) return word;
    if (rng.unit() >= rate) return word;  // draw even at rate 1 keeps streams aligned
    changed = true;
    return it->second;
  });
  out.noop = !changed;
  return out;
}

AttackedQuestion apply_attack(const Question& q, const AttackSpec& spec) {
  switch (spec.kind) {
    case AttackKind::identity:
      return AttackedQuestion{q, true};
    case AttackKind::synonym:
      if (spec.synonyms == nullptr) {
        throw std::invalid_argument("apply_attack: synonym lexicon missing");
      }
      return attack_synonym(q, *spec.synonyms, spec.seed);
    case AttackKind::keyword_injection:
      if (spec.distractors == nullptr) {
        throw std::invalid_argument("apply_attack: distractor table missing");
      }
      return attack_keyword_injection(q, *spec.distractors, spec.seed);
    case AttackKind::mixed_language:
      if (spec.bilingual == nullptr) {
        throw std::invalid_argument("apply_attack: bilingual lexicon missing");
      }
      return attack_mixed_language(q, *spec.bilingual, spec.rate, spec.seed);
  }
  throw std::invalid_argument("apply_attack: unknown attack kind");
}

Corpus attack_corpus(const Corpus& corpus, const AttackSpec& spec) {
  std::vector<Question> attacked;
  attacked.reserve(corpus.size());
  for (const Question& q : corpus.samples()) {
    AttackedQuestion a = apply_attack(q, spec);
    a.question.source = std::string("attack:") + std::string(to_string(spec.kind)) +
                        ":seed=" + std::to_string(spec.seed) +
                        (a.noop ? ":noop" : "");
    attacked.push_back(std::move(a.question));
  }
  return Corpus(std::move(attacked), corpus.registry());
}

AsrReport attack_success_rate(const LinearRouter& router,
                              const EmbeddingProvider& provider,
                              const Corpus& corpus, const AttackSpec& spec) {
  if (corpus.size() == 0) {
    throw std::invalid_argument("attack_success_rate: empty corpus");
  }
  AsrReport report;
  report.total = corpus.size();
  for (const Question& q : corpus.samples()) {
    AttackedQuestion a = apply_attack(q, spec);
    AttackRecord rec;
    rec.id = q.id;
    rec.original = q.text;
    rec.attacked = a.question.text;
    rec.label = q.label;
    rec.noop = a.noop;
    rec.pre = router.route_hard(provider.embed(q.text));
    rec.post = router.route_hard(provider.embed(a.question.text));
    if (rec.pre == q.label) {
      report.pre_correct++;
      if (!(rec.post == q.label)) report.flipped++;
    }
    report.records.push_back(std::move(rec));
  }
  if (report.pre_correct > 0) {
    report.asr = static_cast<double>(report.flipped) /
                 static_cast<double>(report.pre_correct);
  }
  return report;
}

}  // namespace epirouter
