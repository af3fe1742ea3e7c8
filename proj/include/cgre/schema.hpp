#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "cgre/error.hpp"

namespace cgre {

// Label inventory shared by data files, the constraint graph and checkpoints.
// Relation ids follow file order with the NA relation pinned at index 0; type
// ids follow file order and must include the "Others" fallback used for
// unknown entity types.
class Schema {
 public:
  static constexpr int kNaRelation = 0;

  static Schema from_lists(std::vector<std::string> relations,
                           std::vector<std::string> types) {
    Schema s;
    s.relations_ = std::move(relations);
    s.types_ = std::move(types);
    if (s.relations_.empty()) throw SchemaError("schema: no relations");
    if (s.relations_[0] != "NA")
      throw SchemaError("schema: first relation must be NA, got '" +
                        s.relations_[0] + "'");
    if (s.types_.empty()) throw SchemaError("schema: no types");
    for (std::size_t i = 0; i < s.relations_.size(); ++i) {
      if (!s.relation_ids_.emplace(s.relations_[i], static_cast<int>(i)).second)
        throw SchemaError("schema: duplicate relation '" + s.relations_[i] + "'");
    }
    for (std::size_t i = 0; i < s.types_.size(); ++i) {
      if (!s.type_ids_.emplace(s.types_[i], static_cast<int>(i)).second)
        throw SchemaError("schema: duplicate type '" + s.types_[i] + "'");
    }
    auto others = s.type_ids_.find("Others");
    if (others == s.type_ids_.end())
      throw SchemaError("schema: type list must contain 'Others'");
    s.others_type_ = others->second;
    return s;
  }

  static Schema load(const std::string& relations_path,
                     const std::string& types_path) {
    return from_lists(read_lines(relations_path), read_lines(types_path));
  }

  const std::vector<std::string>& relations() const { return relations_; }
  const std::vector<std::string>& types() const { return types_; }
  int num_relations() const { return static_cast<int>(relations_.size()); }
  int num_types() const { return static_cast<int>(types_.size()); }
  int others_type() const { return others_type_; }

  int relation_id(const std::string& name) const {
    auto it = relation_ids_.find(name);
    if (it == relation_ids_.end())
      throw SchemaError("schema: unknown relation '" + name + "'");
    return it->second;
  }

  bool has_type(const std::string& name) const {
    return type_ids_.count(name) != 0;
  }

  // Unknown type names collapse onto Others.
  int type_id_or_others(const std::string& name) const {
    auto it = type_ids_.find(name);
    return it == type_ids_.end() ? others_type_ : it->second;
  }

  int type_id(const std::string& name) const {
    auto it = type_ids_.find(name);
    if (it == type_ids_.end())
      throw SchemaError("schema: unknown type '" + name + "'");
    return it->second;
  }

  const std::string& relation_name(int id) const {
    if (id < 0 || id >= num_relations())
      throw SchemaError("schema: relation id " + std::to_string(id) +
                        " out of range");
    return relations_[static_cast<std::size_t>(id)];
  }

  const std::string& type_name(int id) const {
    if (id < 0 || id >= num_types())
      throw SchemaError("schema: type id " + std::to_string(id) + " out of range");
    return types_[static_cast<std::size_t>(id)];
  }

  // FNV-1a over both name lists; checkpoints carry this value so that a model
  // is never evaluated against a different label inventory.
  std::uint64_t hash() const {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](const std::string& s) {
      for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
      }
      h ^= 0x1f;  // separator so list boundaries matter
      h *= 1099511628211ull;
    };
    for (const auto& r : relations_) mix(r);
    h ^= 0x2f;
    h *= 1099511628211ull;
    for (const auto& t : types_) mix(t);
    return h;
  }

 private:
  static std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      lines.push_back(line);
    }
    return lines;
  }

  std::vector<std::string> relations_;
  std::vector<std::string> types_;
  std::unordered_map<std::string, int> relation_ids_;
  std::unordered_map<std::string, int> type_ids_;
  int others_type_ = -1;
};

}  // namespace cgre
