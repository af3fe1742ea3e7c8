#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "cgre/constraint_graph.hpp"
#include "cgre/corpus.hpp"
#include "cgre/rng.hpp"

namespace cgre {

// Fully generated corpus: schema, constraint triples and labeled sentences.
// Every draw comes from the caller's seed, so a fixture is reproducible.
struct Fixture {
  Schema schema;
  std::string constraints_tsv;
  std::vector<Instance> train;
  std::vector<Instance> test;
};

enum class FixtureKind { overfit, longtail, attention };

inline const char* to_string(FixtureKind k) {
  switch (k) {
    case FixtureKind::overfit: return "overfit";
    case FixtureKind::longtail: return "longtail";
    case FixtureKind::attention: return "attention";
  }
  return "?";
}

inline FixtureKind parse_fixture_kind(const std::string& s) {
  if (s == "overfit") return FixtureKind::overfit;
  if (s == "longtail") return FixtureKind::longtail;
  if (s == "attention") return FixtureKind::attention;
  throw ConfigError("unknown fixture kind '" + s + "'");
}

namespace detail {

inline const std::vector<std::string>& filler_words() {
  static const std::vector<std::string> words{
      "the", "a",    "of",    "in",   "said",  "report", "meeting",
      "city", "group", "news", "last", "week",  "local",  "official",
      "plan", "deal",  "talk", "open", "early", "annual"};
  return words;
}

// Random filler sentence with the head and tail entities (and optionally a
// cue word) spliced in at random distinct positions.
inline Instance make_sentence(Rng& rng, const std::string& head,
                              const std::string& tail, const std::string& cue,
                              int head_type, int tail_type, int relation) {
  const auto& fill = filler_words();
  std::vector<std::string> toks;
  const std::size_t n_fill = 4 + rng.below(4);
  for (std::size_t i = 0; i < n_fill; ++i)
    toks.push_back(fill[rng.below(fill.size())]);
  auto splice = [&](const std::string& w) {
    toks.insert(toks.begin() + static_cast<std::ptrdiff_t>(rng.below(toks.size() + 1)), w);
  };
  splice(head);
  splice(tail);
  if (!cue.empty()) splice(cue);

  Instance inst;
  inst.tokens = toks;
  inst.head_text = head;
  inst.tail_text = tail;
  for (int i = 0; i < static_cast<int>(toks.size()); ++i) {
    if (toks[static_cast<std::size_t>(i)] == head) inst.head_span = {i, i + 1};
    if (toks[static_cast<std::size_t>(i)] == tail) inst.tail_span = {i, i + 1};
  }
  inst.head_type = head_type;
  inst.tail_type = tail_type;
  inst.relation = relation;
  return inst;
}

struct RelationProfile {
  int relation = 0;
  int head_type = 0, tail_type = 0;
  std::string cue;  // empty for NA
};

inline std::string constraint_lines(const Schema& schema,
                                    const std::vector<RelationProfile>& profiles) {
  std::string out;
  for (const RelationProfile& p : profiles) {
    if (p.relation == Schema::kNaRelation) continue;
    out += schema.type_name(p.head_type) + "\t" +
           schema.relation_name(p.relation) + "\t" +
           schema.type_name(p.tail_type) + "\n";
  }
  return out;
}

// `bags` bags for one profile, `min_s..max_s` sentences per bag. Entity
// tokens carry a running id so every bag is a fresh pair.
inline void emit_bags(std::vector<Instance>& out, Rng& rng,
                      const RelationProfile& p, int bags, int min_s, int max_s,
                      int* next_entity) {
  for (int b = 0; b < bags; ++b) {
    const std::string head = "eh" + std::to_string((*next_entity)++);
    const std::string tail = "et" + std::to_string((*next_entity)++);
    const int n_s =
        min_s + static_cast<int>(rng.below(static_cast<std::size_t>(max_s - min_s + 1)));
    for (int s = 0; s < n_s; ++s)
      out.push_back(make_sentence(rng, head, tail, p.cue, p.head_type,
                                  p.tail_type, p.relation));
  }
}

}  // namespace detail

// Small fully separable corpus: four relations with distinct cue words and
// type signatures plus NA, 40 training bags per class (200 total).
inline Fixture make_overfit_fixture(std::uint64_t seed) {
  Rng rng(seed);
  Fixture f;
  f.schema = Schema::from_lists(
      {"NA", "r1", "r2", "r3", "r4"},
      {"T1", "T2", "T3", "T4", "Others"});

  std::vector<detail::RelationProfile> profiles;
  for (int k = 1; k <= 4; ++k) {
    detail::RelationProfile p;
    p.relation = k;
    p.head_type = k - 1;
    p.tail_type = k % 4;
    p.cue = "cue" + std::to_string(k);
    profiles.push_back(p);
  }
  f.constraints_tsv = detail::constraint_lines(f.schema, profiles);

  int next_entity = 0;
  auto emit = [&](std::vector<Instance>& out, int bags) {
    for (const detail::RelationProfile& p : profiles)
      detail::emit_bags(out, rng, p, bags, 1, 2, &next_entity);
    // NA: no cue; the type pair may share a side with a relation signature
    // but never matches one outright
    for (int b = 0; b < bags; ++b) {
      detail::RelationProfile na;
      do {
        na.head_type = static_cast<int>(rng.below(4));
        na.tail_type = static_cast<int>(rng.below(4));
      } while (na.tail_type == (na.head_type + 1) % 4);
      detail::emit_bags(out, rng, na, 1, 1, 2, &next_entity);
    }
  };
  emit(f.train, 40);
  emit(f.test, 10);
  return f;
}

// Long-tailed corpus: five head relations with 30 training bags each and ten
// tail relations with 5 bags each. Labels are a function of the entity-type
// pair plus a cue word; tail relations share cues pairwise, so only the type
// pair separates the two relations of a pair.
inline Fixture make_longtail_fixture(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::string> relations{"NA"};
  for (int k = 1; k <= 5; ++k) relations.push_back("head" + std::to_string(k));
  for (int k = 1; k <= 10; ++k) {
    std::string id = std::to_string(k);
    relations.push_back("tail" + std::string(id.size() < 2 ? "0" : "") + id);
  }
  std::vector<std::string> types;
  for (int t = 1; t <= 8; ++t) types.push_back("T" + std::to_string(t));
  types.push_back("Others");

  Fixture f;
  f.schema = Schema::from_lists(relations, types);

  // unique ordered type pair per relation, drawn from a seeded shuffle
  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j)
      if (i != j) pairs.emplace_back(i, j);
  rng.shuffle(pairs);

  std::vector<detail::RelationProfile> profiles;
  for (int r = 1; r <= 15; ++r) {
    detail::RelationProfile p;
    p.relation = r;
    p.head_type = pairs[static_cast<std::size_t>(r - 1)].first;
    p.tail_type = pairs[static_cast<std::size_t>(r - 1)].second;
    if (r <= 5) {
      p.cue = "hcue" + std::to_string(r);
    } else {
      p.cue = "tcue" + std::to_string((r - 6) / 2 + 1);  // shared pairwise
    }
    profiles.push_back(p);
  }
  f.constraints_tsv = detail::constraint_lines(f.schema, profiles);

  int next_entity = 0;
  auto emit_na = [&](std::vector<Instance>& out, int bags) {
    for (int b = 0; b < bags; ++b) {
      detail::RelationProfile na;
      na.head_type = static_cast<int>(rng.below(8));
      na.tail_type = static_cast<int>(rng.below(8));
      detail::emit_bags(out, rng, na, 1, 1, 2, &next_entity);
    }
  };
  for (const detail::RelationProfile& p : profiles)
    detail::emit_bags(f.train, rng, p, p.relation <= 5 ? 30 : 5, 1, 2,
                      &next_entity);
  emit_na(f.train, 30);
  for (const detail::RelationProfile& p : profiles)
    detail::emit_bags(f.test, rng, p, p.relation <= 5 ? 2 : 5, 1, 2,
                      &next_entity);
  emit_na(f.test, 5);
  return f;
}

// Clean training corpus plus test bags that mix two conforming sentences with
// two constraint-violating distractors (wrong type pair, no cue). Test
// instances carry validity flags for attention scoring.
inline Fixture make_attention_fixture(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::string> relations{"NA"};
  for (int k = 1; k <= 6; ++k) relations.push_back("a" + std::to_string(k));
  std::vector<std::string> types;
  for (int t = 1; t <= 6; ++t) types.push_back("T" + std::to_string(t));
  types.push_back("Others");

  Fixture f;
  f.schema = Schema::from_lists(relations, types);
  std::vector<detail::RelationProfile> profiles;
  for (int r = 1; r <= 6; ++r) {
    detail::RelationProfile p;
    p.relation = r;
    p.head_type = r - 1;
    p.tail_type = r % 6;
    p.cue = "acue" + std::to_string(r);
    profiles.push_back(p);
  }
  f.constraints_tsv = detail::constraint_lines(f.schema, profiles);

  int next_entity = 0;
  for (const detail::RelationProfile& p : profiles)
    detail::emit_bags(f.train, rng, p, 25, 1, 2, &next_entity);
  for (int b = 0; b < 25; ++b) {
    detail::RelationProfile na;
    na.head_type = static_cast<int>(rng.below(6));
    na.tail_type = static_cast<int>(rng.below(6));
    detail::emit_bags(f.train, rng, na, 1, 1, 2, &next_entity);
  }

  for (int b = 0; b < 30; ++b) {
    const detail::RelationProfile& p = profiles[rng.below(profiles.size())];
    const std::string head = "eh" + std::to_string(next_entity++);
    const std::string tail = "et" + std::to_string(next_entity++);
    for (int s = 0; s < 2; ++s) {
      Instance inst = detail::make_sentence(rng, head, tail, p.cue,
                                            p.head_type, p.tail_type, p.relation);
      inst.valid = true;
      f.test.push_back(inst);
    }
    for (int s = 0; s < 2; ++s) {
      // distractor: the type signature of a different relation, no cue
      const detail::RelationProfile& other =
          profiles[(static_cast<std::size_t>(p.relation) + rng.below(5)) % 6];
      Instance inst = detail::make_sentence(rng, head, tail, "",
                                            other.head_type, other.tail_type,
                                            p.relation);
      inst.valid = false;
      f.test.push_back(inst);
    }
  }
  return f;
}

inline Fixture make_fixture(FixtureKind kind, std::uint64_t seed) {
  switch (kind) {
    case FixtureKind::overfit: return make_overfit_fixture(seed);
    case FixtureKind::longtail: return make_longtail_fixture(seed);
    case FixtureKind::attention: return make_attention_fixture(seed);
  }
  throw ConfigError("make_fixture: bad kind");
}

// Writes the five files a run needs: relations.txt, types.txt,
// constraints.tsv, train.jsonl, test.jsonl.
inline void write_fixture(const std::string& dir, const Fixture& f) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  auto write = [&](const std::string& name, const std::string& content) {
    std::ofstream os(fs::path(dir) / name);
    if (!os) throw ParseError("cannot write " + (fs::path(dir) / name).string());
    os << content;
  };
  std::string rels, types;
  for (const auto& r : f.schema.relations()) rels += r + "\n";
  for (const auto& t : f.schema.types()) types += t + "\n";
  write("relations.txt", rels);
  write("types.txt", types);
  write("constraints.tsv", f.constraints_tsv);
  write_instances((fs::path(dir) / "train.jsonl").string(), f.train, f.schema);
  write_instances((fs::path(dir) / "test.jsonl").string(), f.test, f.schema);
}

}  // namespace cgre
