#pragma once

#include <algorithm>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "cgre/error.hpp"
#include "cgre/nn.hpp"
#include "cgre/schema.hpp"
#include "cgre/tensor.hpp"

namespace cgre {

// Token span [start, end).
struct Span {
  int start = 0;
  int end = 0;
  friend bool operator==(const Span& a, const Span& b) {
    return a.start == b.start && a.end == b.end;
  }
};

// One labeled sentence mentioning an entity pair.
struct Instance {
  std::vector<std::string> tokens;
  std::string head_text, tail_text;
  Span head_span, tail_span;
  int head_type = 0, tail_type = 0;
  int relation = Schema::kNaRelation;
  // Distant-supervision ground truth where the corpus provides it: whether
  // the sentence actually expresses the bag label.
  std::optional<bool> valid;
};

// All instances sharing an entity pair (and, for training, a label).
struct Bag {
  std::string head, tail;
  std::vector<Instance> instances;
  std::vector<int> label_set;  // sorted unique; exactly one in training mode

  std::string pair_id() const { return head + "\t" + tail; }
};

enum class BagMode { train, eval };

namespace detail {

inline std::string at_line(const std::string& path, std::size_t line) {
  return path + ":" + std::to_string(line);
}

inline const nlohmann::json& field(const nlohmann::json& j, const char* name,
                                   const std::string& where) {
  auto it = j.find(name);
  if (it == j.end())
    throw ParseError(where + ": missing field '" + std::string(name) + "'");
  return *it;
}

inline Span parse_span(const nlohmann::json& ent, int token_count,
                       const std::string& where) {
  const auto& s = field(ent, "start", where);
  const auto& e = field(ent, "end", where);
  if (!s.is_number_integer() || !e.is_number_integer())
    throw ParseError(where + ": span bounds must be integers");
  Span span{s.get<int>(), e.get<int>()};
  if (span.start < 0 || span.start >= span.end || span.end > token_count)
    throw ParseError(where + ": span [" + std::to_string(span.start) + "," +
                     std::to_string(span.end) + ") outside 0.." +
                     std::to_string(token_count));
  return span;
}

}  // namespace detail

// Reads one JSONL record per line. Every error names the offending line.
inline std::vector<Instance> parse_instances(const std::string& path,
                                             const Schema& schema) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  std::vector<Instance> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string where = detail::at_line(path, lineno);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(where + ": " + e.what());
    }
    if (!j.is_object()) throw ParseError(where + ": record is not an object");

    Instance inst;
    const auto& toks = detail::field(j, "tokens", where);
    if (!toks.is_array() || toks.empty())
      throw ParseError(where + ": 'tokens' must be a non-empty array");
    for (const auto& t : toks) {
      if (!t.is_string()) throw ParseError(where + ": token is not a string");
      inst.tokens.push_back(t.get<std::string>());
    }
    const int n = static_cast<int>(inst.tokens.size());

    for (const char* side : {"head", "tail"}) {
      const auto& ent = detail::field(j, side, where);
      if (!ent.is_object())
        throw ParseError(where + ": '" + std::string(side) + "' is not an object");
      const auto& text = detail::field(ent, "text", where);
      if (!text.is_string())
        throw ParseError(where + ": entity text is not a string");
      const auto& type = detail::field(ent, "type", where);
      if (!type.is_string())
        throw ParseError(where + ": entity type is not a string");
      Span span = detail::parse_span(ent, n, where);
      if (std::string(side) == std::string("head")) {
        inst.head_text = text.get<std::string>();
        inst.head_span = span;
        inst.head_type = schema.type_id_or_others(type.get<std::string>());
      } else {
        inst.tail_text = text.get<std::string>();
        inst.tail_span = span;
        inst.tail_type = schema.type_id_or_others(type.get<std::string>());
      }
    }
    if (inst.head_span == inst.tail_span)
      throw ParseError(where + ": head and tail spans coincide");

    const auto& rel = detail::field(j, "relation", where);
    if (!rel.is_string()) throw ParseError(where + ": 'relation' is not a string");
    try {
      inst.relation = schema.relation_id(rel.get<std::string>());
    } catch (const SchemaError& e) {
      throw SchemaError(where + ": " + e.what());
    }

    if (auto it = j.find("valid"); it != j.end()) {
      if (!it->is_boolean()) throw ParseError(where + ": 'valid' is not a boolean");
      inst.valid = it->get<bool>();
    }
    out.push_back(std::move(inst));
  }
  return out;
}

// Serializer matching parse_instances, used by fixture generation and the
// round-trip tests.
inline void write_instances(std::ostream& os, const std::vector<Instance>& list,
                            const Schema& schema) {
  for (const Instance& inst : list) {
    nlohmann::json j;
    j["tokens"] = inst.tokens;
    j["head"] = {{"text", inst.head_text},
                 {"start", inst.head_span.start},
                 {"end", inst.head_span.end},
                 {"type", schema.type_name(inst.head_type)}};
    j["tail"] = {{"text", inst.tail_text},
                 {"start", inst.tail_span.start},
                 {"end", inst.tail_span.end},
                 {"type", schema.type_name(inst.tail_type)}};
    j["relation"] = schema.relation_name(inst.relation);
    if (inst.valid) j["valid"] = *inst.valid;
    os << j.dump() << "\n";
  }
}

inline void write_instances(const std::string& path,
                            const std::vector<Instance>& list,
                            const Schema& schema) {
  std::ofstream os(path);
  if (!os) throw ParseError("cannot write " + path);
  write_instances(os, list, schema);
}

// Groups instances into bags. Training bags are keyed by (pair, relation) so
// one pair may appear under several labels; evaluation bags are keyed by pair
// alone and collect every labeled relation into label_set.
inline std::vector<Bag> group_bags(const std::vector<Instance>& instances,
                                   BagMode mode) {
  std::vector<Bag> bags;
  std::unordered_map<std::string, std::size_t> index;
  for (const Instance& inst : instances) {
    std::string key = inst.head_text + "\x1f" + inst.tail_text;
    if (mode == BagMode::train) key += "\x1f" + std::to_string(inst.relation);
    auto [it, inserted] = index.emplace(key, bags.size());
    if (inserted) {
      Bag b;
      b.head = inst.head_text;
      b.tail = inst.tail_text;
      bags.push_back(std::move(b));
    }
    Bag& bag = bags[it->second];
    bag.instances.push_back(inst);
    if (!std::count(bag.label_set.begin(), bag.label_set.end(), inst.relation))
      bag.label_set.push_back(inst.relation);
  }
  for (Bag& b : bags) std::sort(b.label_set.begin(), b.label_set.end());
  return bags;
}

inline std::vector<Bag> parse_dataset(const std::string& path,
                                      const Schema& schema, BagMode mode) {
  return group_bags(parse_instances(path, schema), mode);
}

// Instance rendered into fixed-length index arrays. All arrays have max_len
// entries; `length` rows carry real tokens, the rest are PAD. Entity anchor
// positions are the span starts, clipped into the retained window.
struct EncodedInstance {
  std::vector<int> token_ids;
  std::vector<int> head_offsets;  // relative-position table indices
  std::vector<int> tail_offsets;
  int length = 0;
  int head_pos = 0, tail_pos = 0;
  int head_type = 0, tail_type = 0;
};

// Word ids plus the embedding tables they index. The PAD row of word_emb is
// pinned to zero; ids are assigned by first occurrence so vocabulary
// construction is order-deterministic.
struct Vocabulary {
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;

  std::vector<std::string> words;  // id -> word, including <pad>/<unk>
  std::unordered_map<std::string, int> ids;
  Tensor word_emb;  // (V, d_w)
  Tensor pos_emb;   // (2*max_len+1, d_p)
  int d_w = 0, d_p = 0, max_len = 0;

  int id(const std::string& w) const {
    auto it = ids.find(w);
    return it == ids.end() ? kUnk : it->second;
  }

  int size() const { return static_cast<int>(words.size()); }

  void rebuild_index() {
    ids.clear();
    for (std::size_t i = 0; i < words.size(); ++i)
      ids.emplace(words[i], static_cast<int>(i));
  }
};

namespace detail {

inline std::unordered_map<std::string, std::vector<double>> parse_pretrained(
    const std::string& path, int d_w) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  std::unordered_map<std::string, std::vector<double>> vecs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string word;
    ss >> word;
    std::vector<double> v;
    double x;
    while (ss >> x) v.push_back(x);
    if (static_cast<int>(v.size()) != d_w)
      throw SchemaError(at_line(path, lineno) + ": pretrained vector has " +
                        std::to_string(v.size()) + " dims, expected " +
                        std::to_string(d_w));
    vecs[word] = std::move(v);
  }
  return vecs;
}

}  // namespace detail

// Builds the vocabulary over every token in the given bags. All rows start
// from the Xavier draw (same seed, same tables); words found in the optional
// pretrained file then have their rows overwritten, and PAD is zeroed last.
inline Vocabulary build_vocabulary(
    const std::vector<Bag>& bags, int d_w, int d_p, int max_len, Rng& rng,
    const std::optional<std::string>& pretrained_path = std::nullopt) {
  if (d_w < 1 || d_p < 1 || max_len < 1)
    throw ConfigError("build_vocabulary: dimensions must be positive");
  Vocabulary v;
  v.d_w = d_w;
  v.d_p = d_p;
  v.max_len = max_len;
  v.words = {"<pad>", "<unk>"};
  for (const Bag& bag : bags)
    for (const Instance& inst : bag.instances)
      for (const std::string& tok : inst.tokens)
        if (!v.ids.count(tok)) {
          v.ids.emplace(tok, static_cast<int>(v.words.size()));
          v.words.push_back(tok);
        }
  v.rebuild_index();

  v.word_emb = xavier_init({v.size(), d_w}, rng);
  v.pos_emb = xavier_init({2 * max_len + 1, d_p}, rng);
  if (pretrained_path) {
    auto vecs = detail::parse_pretrained(*pretrained_path, d_w);
    for (int i = 0; i < v.size(); ++i) {
      auto it = vecs.find(v.words[static_cast<std::size_t>(i)]);
      if (it == vecs.end()) continue;
      for (int j = 0; j < d_w; ++j) v.word_emb.at(i, j) = it->second[static_cast<std::size_t>(j)];
    }
  }
  for (int j = 0; j < d_w; ++j) v.word_emb.at(Vocabulary::kPad, j) = 0.0;
  return v;
}

// Maps a token index and an entity anchor to a relative-position row: the
// signed distance i - anchor is clipped to [-max_len, max_len] and shifted to
// a non-negative table index.
inline int position_index(int i, int anchor, int max_len) {
  int d = i - anchor;
  d = std::max(-max_len, std::min(max_len, d));
  return d + max_len;
}

inline EncodedInstance encode_instance(const Instance& inst,
                                       const Vocabulary& vocab) {
  if (inst.tokens.empty()) throw DomainError("encode_instance: no tokens");
  const int max_len = vocab.max_len;
  EncodedInstance enc;
  enc.length = std::min<int>(static_cast<int>(inst.tokens.size()), max_len);
  enc.head_pos = std::min(inst.head_span.start, max_len - 1);
  enc.tail_pos = std::min(inst.tail_span.start, max_len - 1);
  enc.head_type = inst.head_type;
  enc.tail_type = inst.tail_type;
  enc.token_ids.assign(static_cast<std::size_t>(max_len), Vocabulary::kPad);
  enc.head_offsets.resize(static_cast<std::size_t>(max_len));
  enc.tail_offsets.resize(static_cast<std::size_t>(max_len));
  for (int i = 0; i < max_len; ++i) {
    if (i < enc.length) enc.token_ids[static_cast<std::size_t>(i)] = vocab.id(inst.tokens[static_cast<std::size_t>(i)]);
    enc.head_offsets[static_cast<std::size_t>(i)] = position_index(i, enc.head_pos, max_len);
    enc.tail_offsets[static_cast<std::size_t>(i)] = position_index(i, enc.tail_pos, max_len);
  }
  return enc;
}

// Bag with its sentences encoded, ready for the model.
struct EncodedBag {
  std::string head, tail;
  std::vector<int> label_set;
  std::vector<EncodedInstance> instances;
  std::vector<std::optional<bool>> valid;

  std::string pair_id() const { return head + "\t" + tail; }
};

inline EncodedBag encode_bag(const Bag& bag, const Vocabulary& vocab) {
  EncodedBag out;
  out.head = bag.head;
  out.tail = bag.tail;
  out.label_set = bag.label_set;
  for (const Instance& inst : bag.instances) {
    out.instances.push_back(encode_instance(inst, vocab));
    out.valid.push_back(inst.valid);
  }
  return out;
}

inline std::vector<EncodedBag> encode_bags(const std::vector<Bag>& bags,
                                           const Vocabulary& vocab) {
  std::vector<EncodedBag> out;
  out.reserve(bags.size());
  for (const Bag& b : bags) out.push_back(encode_bag(b, vocab));
  return out;
}

}  // namespace cgre
