// epirouter: experiment runner for the belief-space routing library.
//
// Subcommands: train, route, eval, attack, continual, bench, demo, kappa.
// Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
// Set EPISTEMIC_ROUTER_NO_COLOR to disable ANSI styling.

#include <unistd.h>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "epirouter/attacks.hpp"
#include "epirouter/continual.hpp"
#include "epirouter/corpus.hpp"
#include "epirouter/errors.hpp"
#include "epirouter/evalstats.hpp"
#include "epirouter/featurize.hpp"
#include "epirouter/router.hpp"
#include "epirouter/solvers.hpp"
#include "epirouter/universe.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace epirouter;

namespace {

// Bad config file or bad flag values. Maps to exit code 1.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  fs::path corpus_path = "data/seed_corpus.jsonl";
  fs::path criteria_path;  // empty: skip criteria reporting
  std::string featurizer = "tfidf";
  std::size_t min_df = 2;
  bool normalize = true;
  std::size_t dim = 512;        // hashing only
  std::uint64_t hash_seed = 17; // hashing only
  TrainConfig train;
  fs::path out_dir = "out";
};

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_real(const std::string& v, std::size_t line) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    throw ConfigError("config line " + std::to_string(line) +
                      ": not a number: " + v);
  }
  if (used != v.size() || !std::isfinite(out)) {
    throw ConfigError("config line " + std::to_string(line) +
                      ": not a number: " + v);
  }
  return out;
}

std::uint64_t parse_uint(const std::string& v, std::size_t line) {
  std::size_t used = 0;
  unsigned long long out = 0;
  try {
    out = std::stoull(v, &used);
  } catch (const std::exception&) {
    throw ConfigError("config line " + std::to_string(line) +
                      ": not a nonnegative integer: " + v);
  }
  if (used != v.size()) {
    throw ConfigError("config line " + std::to_string(line) +
                      ": not a nonnegative integer: " + v);
  }
  return out;
}

bool parse_bool(const std::string& v, std::size_t line) {
  if (v == "true" || v == "yes" || v == "1") return true;
  if (v == "false" || v == "no" || v == "0") return false;
  throw ConfigError("config line " + std::to_string(line) +
                    ": not a boolean: " + v);
}

// Line-oriented `key = value` with [section] headers and # comment lines.
// Unknown sections or keys are rejected. Relative paths are resolved against
// the config file's directory.
RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config file " + path.string());
  }
  RunConfig rc;
  const fs::path base = path.has_parent_path() ? path.parent_path() : ".";
  auto resolve = [&](const std::string& p) -> fs::path {
    fs::path fp(p);
    return fp.is_absolute() ? fp : base / fp;
  };

  std::string raw;
  std::string section;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ConfigError("config line " + std::to_string(lineno) +
                          ": unterminated section header");
      }
      section = trim(line.substr(1, line.size() - 2));
      if (section != "corpus" && section != "featurizer" &&
          section != "train" && section != "run") {
        throw ConfigError("config line " + std::to_string(lineno) +
                          ": unknown section [" + section + "]");
      }
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": expected key = value");
    }

    if (section == "corpus" && key == "path") {
      rc.corpus_path = resolve(value);
    } else if (section == "corpus" && key == "criteria") {
      rc.criteria_path = resolve(value);
    } else if (section == "featurizer" && key == "kind") {
      if (value != "tfidf" && value != "hashing") {
        throw ConfigError("config line " + std::to_string(lineno) +
                          ": featurizer kind must be tfidf or hashing");
      }
      rc.featurizer = value;
    } else if (section == "featurizer" && key == "min_df") {
      rc.min_df = static_cast<std::size_t>(parse_uint(value, lineno));
    } else if (section == "featurizer" && key == "normalize") {
      rc.normalize = parse_bool(value, lineno);
    } else if (section == "featurizer" && key == "dim") {
      rc.dim = static_cast<std::size_t>(parse_uint(value, lineno));
    } else if (section == "featurizer" && key == "hash_seed") {
      rc.hash_seed = parse_uint(value, lineno);
    } else if (section == "train" && key == "learning_rate") {
      rc.train.learning_rate = parse_real(value, lineno);
    } else if (section == "train" && key == "epochs") {
      rc.train.epochs = static_cast<std::size_t>(parse_uint(value, lineno));
    } else if (section == "train" && key == "batch_size") {
      rc.train.batch_size = static_cast<std::size_t>(parse_uint(value, lineno));
    } else if (section == "train" && key == "l2") {
      rc.train.l2 = parse_real(value, lineno);
    } else if (section == "train" && key == "seed") {
      rc.train.seed = parse_uint(value, lineno);
    } else if (section == "run" && key == "out") {
      rc.out_dir = resolve(value);
    } else {
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": unknown key '" + key + "' in section [" +
                        section + "]");
    }
  }
  return rc;
}

// --- output helpers ---------------------------------------------------------

bool use_color() {
  static const bool on =
      ::isatty(1) != 0 && std::getenv("EPISTEMIC_ROUTER_NO_COLOR") == nullptr;
  return on;
}

const char* sty_bold() { return use_color() ? "\x1b[1m" : ""; }
const char* sty_dim() { return use_color() ? "\x1b[2m" : ""; }
const char* sty_off() { return use_color() ? "\x1b[0m" : ""; }

std::string fmt_g(double v, int prec = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", prec, v);
  return buf;
}

std::string fmt_f(double v, int prec = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

void print_header(const std::string& subcommand, const RunConfig& rc) {
  std::cout << sty_bold() << "epirouter " << subcommand << sty_off()
            << " | seed " << rc.train.seed << " | out " << rc.out_dir.string()
            << "\n";
}

void write_records(const fs::path& path, const std::vector<json>& records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw DataError("cannot write records to " + path.string());
  }
  for (const json& r : records) out << r.dump() << "\n";
}

// --- shared pipeline pieces --------------------------------------------------

Corpus only_split(const Corpus& corpus, Split s) {
  std::vector<Question> keep;
  for (const Question& q : corpus.samples()) {
    if (q.split == s) keep.push_back(q);
  }
  return Corpus(std::move(keep), corpus.registry());
}

Corpus load_and_split(const RunConfig& rc) {
  Corpus corpus = load_corpus(rc.corpus_path);
  auto counts = corpus.split_counts();
  if (counts.count(Split::unassigned) != 0 && counts[Split::unassigned] > 0) {
    corpus = split_corpus(corpus, SplitRatios{}, rc.train.seed);
  }
  return corpus;
}

std::unique_ptr<EmbeddingProvider> fit_provider(const RunConfig& rc,
                                                const Corpus& corpus) {
  if (rc.featurizer == "tfidf") {
    return std::make_unique<TfidfModel>(
        tfidf_fit(only_split(corpus, Split::train), rc.min_df, rc.normalize));
  }
  if (rc.featurizer == "hashing") {
    return std::make_unique<HashingProvider>(rc.dim, rc.hash_seed);
  }
  throw ConfigError("unknown featurizer kind: " + rc.featurizer);
}

std::unique_ptr<EmbeddingProvider> load_provider(const RunConfig& rc) {
  if (rc.featurizer == "tfidf") {
    const fs::path p = rc.out_dir / "tfidf.json";
    if (!fs::exists(p)) {
      throw DataError("featurizer file " + p.string() +
                      " not found; run the train subcommand first");
    }
    return std::make_unique<TfidfModel>(TfidfModel::load(p));
  }
  if (rc.featurizer == "hashing") {
    return std::make_unique<HashingProvider>(rc.dim, rc.hash_seed);
  }
  throw ConfigError("unknown featurizer kind: " + rc.featurizer);
}

struct LoadedModel {
  LinearRouter router;
  std::unique_ptr<EmbeddingProvider> provider;
};

LoadedModel load_model(const RunConfig& rc) {
  const fs::path mp = rc.out_dir / "model.json";
  if (!fs::exists(mp)) {
    throw DataError("model file " + mp.string() +
                    " not found; run the train subcommand first");
  }
  LoadedModel lm{LinearRouter::load(mp), load_provider(rc)};
  if (!(lm.provider->source() == lm.router.feature_source())) {
    throw DataError("featurizer config does not match the persisted model in " +
                    rc.out_dir.string() + "; retrain or fix the config");
  }
  return lm;
}

// evaluate() takes the splits as a compile-time list, so pick the overload
// matching whichever splits actually occur in the corpus.
EvalReport evaluate_present(const LinearRouter& r, const EmbeddingProvider& p,
                            const Corpus& c) {
  auto counts = c.split_counts();
  auto has = [&](Split s) {
    auto it = counts.find(s);
    return it != counts.end() && it->second > 0;
  };
  const unsigned m = (has(Split::train) ? 1u : 0u) |
                     (has(Split::val) ? 2u : 0u) |
                     (has(Split::test) ? 4u : 0u) |
                     (has(Split::unseen) ? 8u : 0u);
  using S = Split;
  switch (m) {
    case 1: return evaluate(r, p, c, {S::train});
    case 2: return evaluate(r, p, c, {S::val});
    case 3: return evaluate(r, p, c, {S::train, S::val});
    case 4: return evaluate(r, p, c, {S::test});
    case 5: return evaluate(r, p, c, {S::train, S::test});
    case 6: return evaluate(r, p, c, {S::val, S::test});
    case 7: return evaluate(r, p, c, {S::train, S::val, S::test});
    case 8: return evaluate(r, p, c, {S::unseen});
    case 9: return evaluate(r, p, c, {S::train, S::unseen});
    case 10: return evaluate(r, p, c, {S::val, S::unseen});
    case 11: return evaluate(r, p, c, {S::train, S::val, S::unseen});
    case 12: return evaluate(r, p, c, {S::test, S::unseen});
    case 13: return evaluate(r, p, c, {S::train, S::test, S::unseen});
    case 14: return evaluate(r, p, c, {S::val, S::test, S::unseen});
    case 15: return evaluate(r, p, c, {S::train, S::val, S::test, S::unseen});
    default:
      throw DataError("corpus " + std::string("has no split-assigned samples"));
  }
}

double mean_training_loss(const LinearRouter& r, const RouterDataset& ds,
                          double l2) {
  double s = 0.0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const RoutingDecision d = r.predict_probs(ds.x[i]);
    const double p = std::max(d.probabilities[ds.label[i]], 1e-300);
    s -= std::log(p);
  }
  s /= static_cast<double>(ds.size());
  double w2 = 0.0;
  for (double w : r.weights()) w2 += w * w;
  return s + 0.5 * l2 * w2;
}

json split_accuracy_json(const EvalReport& rep) {
  json j = json::object();
  for (const auto& [split, acc] : rep.accuracy_by_split) {
    j[std::string(to_string(split))] = acc;
  }
  return j;
}

void print_eval_tables(const EvalReport& rep, const UniverseRegistry& registry) {
  std::cout << "overall accuracy: " << fmt_f(rep.overall_accuracy) << " over "
            << rep.total << " samples\n";
  std::cout << sty_bold() << "per split" << sty_off() << "\n";
  for (const auto& [split, acc] : rep.accuracy_by_split) {
    std::printf("  %-8s %s  (n = %zu)\n", std::string(to_string(split)).c_str(),
                fmt_f(acc).c_str(), rep.count_by_split.at(split));
  }
  std::cout << sty_bold() << "per universe" << sty_off() << "\n";
  for (std::size_t i = 0; i < registry.size(); ++i) {
    const auto& acc = rep.accuracy_by_universe[i];
    std::printf("  %-16s %s\n", registry.at(i).symbol.c_str(),
                acc ? fmt_f(*acc).c_str() : "n/a");
  }
  if (rep.generalization_gap) {
    std::cout << "generalization gap (test - unseen): "
              << fmt_f(*rep.generalization_gap) << "\n";
  }
  std::cout << sty_bold() << "confusion (rows = true)" << sty_off() << "\n";
  std::printf("  %-16s", "");
  for (std::size_t j = 0; j < registry.size(); ++j) {
    std::printf(" %14s", registry.at(j).symbol.c_str());
  }
  std::printf("\n");
  for (std::size_t i = 0; i < registry.size(); ++i) {
    std::printf("  %-16s", registry.at(i).symbol.c_str());
    for (std::size_t j = 0; j < registry.size(); ++j) {
      std::printf(" %14zu", rep.confusion[i * registry.size() + j]);
    }
    std::printf("\n");
  }
}

void write_confusion_csv(const fs::path& path, const EvalReport& rep,
                         const UniverseRegistry& registry) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << "true\\pred";
  for (std::size_t j = 0; j < registry.size(); ++j) {
    out << "," << registry.at(j).symbol;
  }
  out << "\n";
  for (std::size_t i = 0; i < registry.size(); ++i) {
    out << registry.at(i).symbol;
    for (std::size_t j = 0; j < registry.size(); ++j) {
      out << "," << rep.confusion[i * registry.size() + j];
    }
    out << "\n";
  }
}

void print_solver_output(const SolverOutput& out, const char* role) {
  std::printf("  %s%-18s%s [%s] %s\n", sty_dim(), role, sty_off(),
              out.universe.symbol.c_str(), out.verdict.c_str());
  for (const Claim& c : out.claims) {
    std::printf("    %-20s = %s%s%s\n", c.name.c_str(),
                fmt_g(c.value, 10).c_str(), c.units.empty() ? "" : " ",
                c.units.c_str());
  }
}

json claims_json(const SolverOutput& out) {
  json arr = json::array();
  for (const Claim& c : out.claims) {
    arr.push_back(json{{"name", c.name}, {"units", c.units}, {"value", c.value}});
  }
  return json{{"claims", arr},
              {"universe", out.universe.symbol},
              {"validity_domain", out.validity_domain.symbol},
              {"verdict", out.verdict}};
}

json cl_result_json(const CLResult& r) {
  return json{{"forgetting", r.forgetting},
              {"new_acc", r.new_acc},
              {"old_acc_after", r.old_acc_after},
              {"old_acc_before", r.old_acc_before},
              {"overall_acc", r.overall_acc}};
}

void print_cl_row(const std::string& name, const CLResult& r) {
  std::printf("  %-24s old_before %s  old_after %s  new %s  overall %s  forgetting %s\n",
              name.c_str(), fmt_f(r.old_acc_before).c_str(),
              fmt_f(r.old_acc_after).c_str(), fmt_f(r.new_acc).c_str(),
              fmt_f(r.overall_acc).c_str(), fmt_f(r.forgetting).c_str());
}

// --- subcommands -------------------------------------------------------------

int cmd_train(const RunConfig& rc) {
  print_header("train", rc);
  Corpus corpus = load_and_split(rc);
  if (!rc.criteria_path.empty()) {
    const CriteriaTable criteria = load_criteria(rc.criteria_path);
    std::size_t violations = 0;
    for (const Question& q : corpus.samples()) {
      violations += validate_sample(q, criteria).size();
    }
    std::cout << "criteria violations: " << violations << "\n";
  }
  auto provider = fit_provider(rc, corpus);
  const RouterDataset train_ds = make_dataset(corpus, *provider, {Split::train});
  const LinearRouter router =
      train_router(train_ds, corpus.registry(), rc.train, provider->source());

  fs::create_directories(rc.out_dir);
  router.save(rc.out_dir / "model.json");
  if (rc.featurizer == "tfidf") {
    static_cast<const TfidfModel&>(*provider).save(rc.out_dir / "tfidf.json");
  }

  const double loss = mean_training_loss(router, train_ds, rc.train.l2);
  const EvalReport rep = evaluate_present(router, *provider, corpus);
  std::cout << "featurizer: " << rc.featurizer << " (dim " << provider->dim()
            << ")\n";
  std::cout << "final training loss: " << fmt_g(loss, 10) << "\n";
  print_eval_tables(rep, corpus.registry());
  std::cout << "model written to " << (rc.out_dir / "model.json").string()
            << "\n";

  write_records(rc.out_dir / "train_report.jsonl",
                {json{{"accuracy_by_split", split_accuracy_json(rep)},
                      {"command", "train"},
                      {"dim", provider->dim()},
                      {"featurizer", rc.featurizer},
                      {"final_loss", loss},
                      {"model", "model.json"},
                      {"samples", corpus.size()},
                      {"seed", rc.train.seed}}});
  return 0;
}

struct RouteFlags {
  std::string text;
  bool solve = false;
  long n = 100;
  long heads = 60;
  double alpha = 0.05;
  double prior_a = 1.0;
  double prior_b = 1.0;
  double threshold = 0.5;
  long level = 1;
};

int cmd_route(const RunConfig& rc, const RouteFlags& rf) {
  print_header("route", rc);
  LoadedModel lm = load_model(rc);
  const FeatureVector x = lm.provider->embed(rf.text);
  const RoutingDecision d = lm.router.predict_probs(x);
  const UniverseRegistry& registry = lm.router.registry();

  std::cout << "text: " << rf.text << "\n";
  std::cout << sty_bold() << "chosen: " << d.chosen.symbol << sty_off()
            << "  confidence " << fmt_f(d.confidence) << "\n";
  for (std::size_t i = 0; i < registry.size(); ++i) {
    std::printf("  %-16s %s\n", registry.at(i).symbol.c_str(),
                fmt_f(d.probabilities[i]).c_str());
  }

  json rec{{"chosen", d.chosen.symbol},
           {"command", "route"},
           {"confidence", d.confidence},
           {"text", rf.text}};
  json probs = json::object();
  for (std::size_t i = 0; i < registry.size(); ++i) {
    probs[registry.at(i).symbol] = d.probabilities[i];
  }
  rec["probabilities"] = probs;

  if (rf.solve) {
    SolverProblem problem = NoParams{};
    if (d.chosen.symbol == kStatFreq) {
      problem = CoinTestProblem{rf.n, rf.heads, rf.alpha};
    } else if (d.chosen.symbol == kStatBayes) {
      problem = CoinPosteriorProblem{rf.n, rf.heads, rf.prior_a, rf.prior_b,
                                     rf.threshold};
    } else if (d.chosen.symbol == kPhysClassical ||
               d.chosen.symbol == kPhysQuantum) {
      problem = AtomProblem{rf.level};
    }
    const SolverOutput out = SolverRegistry::standard().dispatch(d.chosen, problem);
    std::cout << sty_bold() << "solver" << sty_off() << "\n";
    print_solver_output(out, "dispatched");
    rec["solver"] = claims_json(out);
  }

  fs::create_directories(rc.out_dir);
  write_records(rc.out_dir / "route_report.jsonl", {rec});
  return 0;
}

int cmd_eval(const RunConfig& rc) {
  print_header("eval", rc);
  LoadedModel lm = load_model(rc);
  const Corpus corpus = load_and_split(rc);
  const EvalReport rep = evaluate_present(lm.router, *lm.provider, corpus);
  print_eval_tables(rep, corpus.registry());

  fs::create_directories(rc.out_dir);
  write_confusion_csv(rc.out_dir / "confusion.csv", rep, corpus.registry());
  json by_universe = json::object();
  for (std::size_t i = 0; i < corpus.registry().size(); ++i) {
    const auto& acc = rep.accuracy_by_universe[i];
    by_universe[corpus.registry().at(i).symbol] =
        acc ? json(*acc) : json(nullptr);
  }
  json rec{{"accuracy_by_split", split_accuracy_json(rep)},
           {"accuracy_by_universe", by_universe},
           {"command", "eval"},
           {"confusion", "confusion.csv"},
           {"overall_accuracy", rep.overall_accuracy},
           {"total", rep.total}};
  rec["generalization_gap"] =
      rep.generalization_gap ? json(*rep.generalization_gap) : json(nullptr);
  write_records(rc.out_dir / "eval_report.jsonl", {rec});
  std::cout << "confusion grid written to "
            << (rc.out_dir / "confusion.csv").string() << "\n";
  return 0;
}

struct AttackFlags {
  std::string kind = "identity";
  double rate = 0.5;
  std::string split = "test";
  std::string synonyms, distractors, bilingual;  // empty: next to the corpus
  std::optional<std::uint64_t> seed;             // default: global seed
};

int cmd_attack(const RunConfig& rc, const AttackFlags& af) {
  print_header("attack", rc);
  const auto kind = attack_kind_from_string(af.kind);
  if (!kind) throw ConfigError("unknown attack kind: " + af.kind);
  const auto split = split_from_string(af.split);
  if (!split) throw ConfigError("unknown split: " + af.split);

  LoadedModel lm = load_model(rc);
  const Corpus corpus = only_split(load_and_split(rc), *split);

  const fs::path lexdir = rc.corpus_path.parent_path() / "lexicons";
  AttackSpec spec;
  spec.kind = *kind;
  spec.rate = af.rate;
  spec.seed = af.seed.value_or(rc.train.seed);
  SynonymLexicon syn;
  DistractorTable dis;
  BilingualLexicon bil;
  if (spec.kind == AttackKind::synonym) {
    syn = load_synonym_lexicon(
        af.synonyms.empty() ? lexdir / "synonyms.jsonl" : fs::path(af.synonyms));
    spec.synonyms = &syn;
  } else if (spec.kind == AttackKind::keyword_injection) {
    dis = load_distractor_table(af.distractors.empty()
                                    ? lexdir / "distractors.jsonl"
                                    : fs::path(af.distractors));
    spec.distractors = &dis;
  } else if (spec.kind == AttackKind::mixed_language) {
    bil = load_bilingual_lexicon(af.bilingual.empty()
                                     ? lexdir / "bilingual.jsonl"
                                     : fs::path(af.bilingual));
    spec.bilingual = &bil;
  }

  const AsrReport rep = attack_success_rate(lm.router, *lm.provider, corpus, spec);
  std::cout << "kind: " << to_string(spec.kind) << "  split: " << af.split
            << "  seed: " << spec.seed << "\n";
  std::cout << "pre-attack correct: " << rep.pre_correct << " / " << rep.total
            << "\n";
  std::cout << "flipped: " << rep.flipped << "\n";
  std::cout << sty_bold() << "attack success rate: "
            << (rep.asr ? fmt_f(*rep.asr) : "n/a") << sty_off() << "\n";
  std::size_t shown = 0;
  for (const AttackRecord& r : rep.records) {
    if (r.pre == r.post || shown >= 5) continue;
    std::printf("  %s%s -> %s%s  %s\n", sty_dim(), r.pre.symbol.c_str(),
                r.post.symbol.c_str(), sty_off(), r.attacked.c_str());
    ++shown;
  }

  std::vector<json> records;
  records.push_back(json{{"asr", rep.asr ? json(*rep.asr) : json(nullptr)},
                         {"command", "attack"},
                         {"flipped", rep.flipped},
                         {"kind", std::string(to_string(spec.kind))},
                         {"pre_correct", rep.pre_correct},
                         {"seed", spec.seed},
                         {"split", af.split},
                         {"total", rep.total}});
  for (const AttackRecord& r : rep.records) {
    records.push_back(json{{"attacked", r.attacked},
                           {"id", r.id},
                           {"label", r.label.symbol},
                           {"noop", r.noop},
                           {"post", r.post.symbol},
                           {"pre", r.pre.symbol}});
  }
  fs::create_directories(rc.out_dir);
  write_records(rc.out_dir / "attack_report.jsonl", records);
  return 0;
}

struct ContinualFlags {
  std::string method = "naive";
  double lambda = 0.0;
  double fraction = 0.10;
  std::string sweep;   // comma-separated fractions
  bool orders = false;
};

std::vector<double> parse_fraction_list(const std::string& s) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    const auto comma = s.find(',', pos);
    const std::string item =
        trim(s.substr(pos, comma == std::string::npos ? comma : comma - pos));
    if (item.empty()) throw ConfigError("bad fraction list: " + s);
    out.push_back(parse_real(item, 0));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

int cmd_continual(const RunConfig& rc, const ContinualFlags& cf) {
  print_header("continual", rc);
  const Corpus corpus = load_and_split(rc);
  auto provider = fit_provider(rc, corpus);
  const PhasePlan plan = default_two_phase_plan();

  std::vector<json> records;
  fs::create_directories(rc.out_dir);

  if (cf.orders) {
    const auto orders = default_expansion_orders();
    const std::vector<CLResult> results =
        expansion_orders(corpus, *provider, orders, rc.train);
    std::cout << "expansion orders at rehearsal fraction 0.20\n";
    for (std::size_t i = 0; i < results.size(); ++i) {
      print_cl_row("order " + std::to_string(i), results[i]);
      json rec = cl_result_json(results[i]);
      rec["command"] = "continual";
      rec["mode"] = "orders";
      rec["order"] = i;
      records.push_back(rec);
    }
    write_records(rc.out_dir / "continual_report.jsonl", records);
    return 0;
  }

  if (!cf.sweep.empty()) {
    const std::vector<double> fractions = parse_fraction_list(cf.sweep);
    const auto rows = replay_sweep(corpus, *provider, plan, rc.train, fractions);
    std::cout << "replay sweep\n";
    for (const SweepRow& row : rows) {
      print_cl_row("fraction " + fmt_g(row.fraction), row.result);
      json rec = cl_result_json(row.result);
      rec["command"] = "continual";
      rec["fraction"] = row.fraction;
      rec["mode"] = "sweep";
      records.push_back(rec);
    }
    write_records(rc.out_dir / "continual_report.jsonl", records);
    return 0;
  }

  CLResult result;
  json rec;
  if (cf.method == "naive") {
    result = train_sequential_naive(corpus, *provider, plan, rc.train);
    rec = cl_result_json(result);
  } else if (cf.method == "ewc") {
    result = train_sequential_ewc(corpus, *provider, plan, rc.train, cf.lambda);
    rec = cl_result_json(result);
    rec["lambda"] = cf.lambda;
  } else if (cf.method == "rehearsal") {
    result =
        train_sequential_rehearsal(corpus, *provider, plan, rc.train, cf.fraction);
    rec = cl_result_json(result);
    rec["fraction"] = cf.fraction;
  } else {
    throw ConfigError("unknown continual method: " + cf.method);
  }
  rec["command"] = "continual";
  rec["method"] = cf.method;
  rec["mode"] = "single";
  print_cl_row(cf.method, result);
  write_records(rc.out_dir / "continual_report.jsonl", {rec});
  return 0;
}

int cmd_bench(const RunConfig& rc, std::size_t iterations) {
  print_header("bench", rc);
  LoadedModel lm = load_model(rc);
  const Corpus corpus = load_and_split(rc);
  const LatencyReport rep =
      latency_bench(lm.router, *lm.provider, corpus, SolverRegistry::standard(),
                    IncompatibilityRegistry::standard(), iterations);
  std::cout << "calls per strategy: " << rep.calls_per_strategy
            << " (warmup " << rep.warmup_calls << ")\n";
  std::printf("  %-6s median %10llu ns   p95 %10llu ns\n", "hard",
              static_cast<unsigned long long>(rep.hard_median_ns),
              static_cast<unsigned long long>(rep.hard_p95_ns));
  std::printf("  %-6s median %10llu ns   p95 %10llu ns\n", "soft",
              static_cast<unsigned long long>(rep.soft_median_ns),
              static_cast<unsigned long long>(rep.soft_p95_ns));
  fs::create_directories(rc.out_dir);
  write_records(rc.out_dir / "bench_report.jsonl",
                {json{{"calls_per_strategy", rep.calls_per_strategy},
                      {"command", "bench"},
                      {"hard_median_ns", rep.hard_median_ns},
                      {"hard_p95_ns", rep.hard_p95_ns},
                      {"soft_median_ns", rep.soft_median_ns},
                      {"soft_p95_ns", rep.soft_p95_ns},
                      {"warmup_calls", rep.warmup_calls}}});
  return 0;
}

void print_mixing(const UniverseId& a, const UniverseId& b) {
  const IncompatibilityRegistry reg = IncompatibilityRegistry::standard();
  const std::vector<std::pair<UniverseId, double>> weights = {{a, 0.5}, {b, 0.5}};
  const MixingVerdict v = check_mixing(weights, reg);
  std::printf("  %smixing %s (0.5) + %s (0.5)%s verdict %s\n", sty_dim(),
              a.symbol.c_str(), b.symbol.c_str(), sty_off(),
              v.consistent ? "consistent" : "inconsistent");
  std::printf("    %s\n", v.reason.c_str());
}

int cmd_demo(const RunConfig& rc) {
  print_header("demo", rc);

  std::cout << sty_bold()
            << "Demo 1: is the coin fair? (n = 100, heads = 60, alpha = 0.05)"
            << sty_off() << "\n";
  print_solver_output(solve_freq_coin(100, 60, 0.05), "correct framework");
  print_solver_output(solve_bayes_coin(100, 60, 1.0, 1.0, 0.5),
                      "wrong framework");
  print_mixing(UniverseId{kStatFreq}, UniverseId{kStatBayes});

  std::cout << sty_bold()
            << "Demo 2: estimate the mean (prior N(0, 1), obs 2.1 1.9 2.3, "
               "noise variance 1)"
            << sty_off() << "\n";
  const std::vector<double> obs = {2.1, 1.9, 2.3};
  print_solver_output(solve_bayes_normal(0.0, 1.0, obs, 1.0),
                      "correct framework");
  print_solver_output(solve_freq_normal_mle(obs, 1.0, 0.95), "wrong framework");
  print_mixing(UniverseId{kStatFreq}, UniverseId{kStatBayes});

  std::cout << sty_bold()
            << "Demo 3: is the hydrogen atom stable? (ground state)"
            << sty_off() << "\n";
  print_solver_output(solve_quantum_atom(1), "correct framework");
  print_solver_output(solve_classical_atom(), "wrong framework");
  print_mixing(UniverseId{kPhysClassical}, UniverseId{kPhysQuantum});
  return 0;
}

int cmd_kappa(const RunConfig& rc, const std::string& pairs_flag) {
  print_header("kappa", rc);
  const fs::path pairs_path =
      pairs_flag.empty()
          ? rc.corpus_path.parent_path() / "annotations" / "demo_pairs.jsonl"
          : fs::path(pairs_flag);
  const UniverseRegistry registry = UniverseRegistry::standard();
  const auto pairs = load_annotation_pairs(pairs_path, registry);
  const KappaResult k = cohen_kappa(pairs, registry);
  std::cout << "pairs: " << pairs.size() << "\n";
  std::cout << "observed agreement: " << fmt_f(k.observed_agreement) << "\n";
  std::cout << sty_bold() << "cohen kappa: " << fmt_f(k.kappa) << sty_off()
            << "\n";
  fs::create_directories(rc.out_dir);
  write_records(rc.out_dir / "kappa_report.jsonl",
                {json{{"command", "kappa"},
                      {"kappa", k.kappa},
                      {"observed_agreement", k.observed_agreement},
                      {"pairs", pairs.size()}}});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"belief-space router: training, routing, and experiments"};
  app.require_subcommand(1);
  app.fallthrough(true);

  std::string config_flag;
  std::uint64_t seed_flag = 0;
  std::string out_flag;
  app.add_option("--config", config_flag, "config file (key = value sections)");
  CLI::Option* seed_opt =
      app.add_option("--seed", seed_flag, "override the training/attack seed");
  CLI::Option* out_opt = app.add_option("--out", out_flag, "output directory");

  std::string feat_flag;
  std::size_t dim_flag = 0;
  std::uint64_t hash_seed_flag = 0;
  std::size_t min_df_flag = 0;
  CLI::Option* feat_opt =
      app.add_option("--featurizer", feat_flag, "tfidf or hashing");
  CLI::Option* dim_opt =
      app.add_option("--dim", dim_flag, "hashing feature dimension");
  CLI::Option* hash_seed_opt =
      app.add_option("--hash-seed", hash_seed_flag, "hashing seed");
  CLI::Option* min_df_opt =
      app.add_option("--min-df", min_df_flag, "tfidf minimum document frequency");

  CLI::App* train_cmd = app.add_subcommand("train", "fit and persist a router");

  RouteFlags rf;
  CLI::App* route_cmd =
      app.add_subcommand("route", "classify a question and optionally solve it");
  route_cmd->add_option("--text", rf.text, "question text")->required();
  route_cmd->add_flag("--solve", rf.solve,
                      "dispatch the chosen universe's solver");
  route_cmd->add_option("--n", rf.n, "trial count for the coin solvers");
  route_cmd->add_option("--heads", rf.heads, "observed heads");
  route_cmd->add_option("--alpha", rf.alpha, "significance level");
  route_cmd->add_option("--prior-a", rf.prior_a, "beta prior alpha");
  route_cmd->add_option("--prior-b", rf.prior_b, "beta prior beta");
  route_cmd->add_option("--threshold", rf.threshold, "posterior threshold");
  route_cmd->add_option("--level", rf.level, "bound-state level");

  CLI::App* eval_cmd =
      app.add_subcommand("eval", "evaluate the persisted router on the corpus");

  AttackFlags af;
  CLI::App* attack_cmd =
      app.add_subcommand("attack", "measure attack success rate");
  attack_cmd
      ->add_option("--kind", af.kind,
                   "identity | synonym | keyword_injection | mixed_language")
      ->required();
  attack_cmd->add_option("--rate", af.rate, "mixed-language swap probability");
  attack_cmd->add_option("--split", af.split, "corpus split to attack");
  attack_cmd->add_option("--synonyms", af.synonyms, "synonym lexicon path");
  attack_cmd->add_option("--distractors", af.distractors,
                         "distractor table path");
  attack_cmd->add_option("--bilingual", af.bilingual, "bilingual lexicon path");
  std::uint64_t attack_seed = 0;
  CLI::Option* attack_seed_opt =
      attack_cmd->add_option("--attack-seed", attack_seed,
                             "attack seed (defaults to the global seed)");

  ContinualFlags cf;
  CLI::App* continual_cmd =
      app.add_subcommand("continual", "sequential-phase training experiments");
  continual_cmd->add_option("--method", cf.method, "naive | ewc | rehearsal");
  continual_cmd->add_option("--lambda", cf.lambda, "ewc penalty strength");
  continual_cmd->add_option("--fraction", cf.fraction, "rehearsal fraction");
  continual_cmd->add_option("--sweep", cf.sweep,
                            "comma-separated rehearsal fractions");
  continual_cmd->add_flag("--orders", cf.orders,
                          "compare the bundled expansion orders");

  std::size_t iterations = 2000;
  CLI::App* bench_cmd =
      app.add_subcommand("bench", "hard vs soft routing latency");
  bench_cmd->add_option("--iterations", iterations, "timed calls per strategy");

  CLI::App* demo_cmd = app.add_subcommand(
      "demo", "three worked error-propagation demonstrations");

  std::string pairs_flag;
  CLI::App* kappa_cmd =
      app.add_subcommand("kappa", "inter-annotator agreement from a pairs file");
  kappa_cmd->add_option("--pairs", pairs_flag, "annotation pairs path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    RunConfig rc;
    if (!config_flag.empty()) rc = load_run_config(config_flag);
    if (seed_opt->count() > 0) rc.train.seed = seed_flag;
    if (out_opt->count() > 0) rc.out_dir = out_flag;
    if (feat_opt->count() > 0) {
      if (feat_flag != "tfidf" && feat_flag != "hashing") {
        throw ConfigError("unknown featurizer kind: " + feat_flag);
      }
      rc.featurizer = feat_flag;
    }
    if (dim_opt->count() > 0) rc.dim = dim_flag;
    if (hash_seed_opt->count() > 0) rc.hash_seed = hash_seed_flag;
    if (min_df_opt->count() > 0) rc.min_df = min_df_flag;
    if (attack_seed_opt->count() > 0) af.seed = attack_seed;

    if (train_cmd->parsed()) return cmd_train(rc);
    if (route_cmd->parsed()) return cmd_route(rc, rf);
    if (eval_cmd->parsed()) return cmd_eval(rc);
    if (attack_cmd->parsed()) return cmd_attack(rc, af);
    if (continual_cmd->parsed()) return cmd_continual(rc, cf);
    if (bench_cmd->parsed()) return cmd_bench(rc, iterations);
    if (demo_cmd->parsed()) return cmd_demo(rc);
    if (kappa_cmd->parsed()) return cmd_kappa(rc, pairs_flag);
    std::cerr << "no subcommand selected\n";
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 3;
  }
}
