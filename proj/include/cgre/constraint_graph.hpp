#pragma once

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "cgre/corpus.hpp"
#include "cgre/schema.hpp"
#include "cgre/tensor.hpp"

namespace cgre {

// Counters from one constraint-file load, for logging and sanity checks.
struct GraphBuildReport {
  int accepted = 0;         // unique usable triples
  int duplicates = 0;       // repeated triples, merged silently
  int rejected = 0;         // triples naming a type outside the schema
  int constraint_edges = 0; // unique directed edges induced by the triples
  int na_edges = 0;         // edges added for the NA relation
  int self_loops = 0;
  std::vector<std::string> dangling_relations;  // non-NA relations w/o triples

  std::string to_text() const {
    std::ostringstream os;
    os << "constraint triples: " << accepted << " accepted, " << duplicates
       << " duplicate, " << rejected << " rejected\n"
       << "edges: " << constraint_edges << " constraint, " << na_edges
       << " NA, " << self_loops << " self-loops\n";
    if (!dangling_relations.empty()) {
      os << "warning: relations without constraints:";
      for (const auto& r : dangling_relations) os << " " << r;
      os << "\n";
    }
    return os.str();
  }
};

// Bipartite digraph over relation and type nodes. A triple
// (head_type, relation, tail_type) contributes the edges head_type->relation
// and relation->tail_type. Relation nodes occupy ids [0, n_r), type nodes
// [n_r, n_r + n_t). The NA relation is connected to every type in both
// directions, and every node carries a self-loop; the adjacency matrix is the
// binary indicator of the edge set.
class ConstraintGraph {
 public:
  Schema schema;
  Tensor adjacency;  // (n, n), row = source node
  GraphBuildReport report;

  int num_relations() const { return schema.num_relations(); }
  int num_types() const { return schema.num_types(); }
  int num_nodes() const { return schema.num_relations() + schema.num_types(); }
  int type_node(int type_id) const { return schema.num_relations() + type_id; }

  // Head types allowed for a relation, sorted. NA allows every type.
  const std::vector<int>& predecessors(int relation) const {
    check_relation(relation);
    return preds_[static_cast<std::size_t>(relation)];
  }

  // Tail types allowed for a relation, sorted. NA allows every type.
  const std::vector<int>& successors(int relation) const {
    check_relation(relation);
    return succs_[static_cast<std::size_t>(relation)];
  }

  bool allows_head(int relation, int type_id) const {
    const auto& p = predecessors(relation);
    return std::binary_search(p.begin(), p.end(), type_id);
  }

  bool allows_tail(int relation, int type_id) const {
    const auto& s = successors(relation);
    return std::binary_search(s.begin(), s.end(), type_id);
  }

  friend ConstraintGraph build_constraint_graph(const Schema&,
                                                const std::string&);

 private:
  void check_relation(int r) const {
    if (r < 0 || r >= num_relations())
      throw DomainError("constraint graph: relation id " + std::to_string(r) +
                        " out of range");
  }

  std::vector<std::vector<int>> preds_, succs_;
};

// Loads tab-separated "head_type<TAB>relation<TAB>tail_type" triples. Triples
// naming a type outside the schema are rejected (counted, not fatal); an
// unknown relation name is a schema error. Duplicates merge silently.
inline ConstraintGraph build_constraint_graph(const Schema& schema,
                                              const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);

  const int n_r = schema.num_relations();
  const int n_t = schema.num_types();
  const int n = n_r + n_t;

  ConstraintGraph g;
  g.schema = schema;
  g.preds_.assign(static_cast<std::size_t>(n_r), {});
  g.succs_.assign(static_cast<std::size_t>(n_r), {});

  std::set<std::pair<int, int>> triples;  // (relation, head/tail key) dedup
  std::set<std::pair<std::pair<int, int>, int>> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string t1, rel, t2;
    if (!std::getline(ss, t1, '\t') || !std::getline(ss, rel, '\t') ||
        !std::getline(ss, t2, '\t'))
      throw ParseError(path + ":" + std::to_string(lineno) +
                       ": expected head_type<TAB>relation<TAB>tail_type");
    int r;
    try {
      r = schema.relation_id(rel);
    } catch (const SchemaError& e) {
      throw SchemaError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (!schema.has_type(t1) || !schema.has_type(t2)) {
      ++g.report.rejected;
      continue;
    }
    auto key = std::make_pair(std::make_pair(r, schema.type_id(t1)),
                              schema.type_id(t2));
    if (!seen.insert(key).second) {
      ++g.report.duplicates;
      continue;
    }
    ++g.report.accepted;
    auto& p = g.preds_[static_cast<std::size_t>(r)];
    auto& s = g.succs_[static_cast<std::size_t>(r)];
    if (!std::count(p.begin(), p.end(), key.first.second))
      p.push_back(key.first.second);
    if (!std::count(s.begin(), s.end(), key.second)) s.push_back(key.second);
  }

  // The NA relation is compatible with everything.
  auto& na_p = g.preds_[Schema::kNaRelation];
  auto& na_s = g.succs_[Schema::kNaRelation];
  na_p.clear();
  na_s.clear();
  for (int t = 0; t < n_t; ++t) {
    na_p.push_back(t);
    na_s.push_back(t);
  }

  for (auto& v : g.preds_) std::sort(v.begin(), v.end());
  for (auto& v : g.succs_) std::sort(v.begin(), v.end());

  for (int r = 1; r < n_r; ++r)
    if (g.preds_[static_cast<std::size_t>(r)].empty() &&
        g.succs_[static_cast<std::size_t>(r)].empty())
      g.report.dangling_relations.push_back(schema.relation_name(r));

  // Assemble the indicator matrix: constraint edges first, then NA edges,
  // then self-loops, counting each category once.
  g.adjacency = Tensor::zeros({n, n});
  auto set_edge = [&g](int src, int dst) -> bool {
    double& cell = g.adjacency.at(src, dst);
    if (cell != 0.0) return false;
    cell = 1.0;
    return true;
  };
  for (int r = 1; r < n_r; ++r) {
    for (int t : g.preds_[static_cast<std::size_t>(r)])
      if (set_edge(g.type_node(t), r)) ++g.report.constraint_edges;
    for (int t : g.succs_[static_cast<std::size_t>(r)])
      if (set_edge(r, g.type_node(t))) ++g.report.constraint_edges;
  }
  for (int t = 0; t < n_t; ++t) {
    if (set_edge(g.type_node(t), Schema::kNaRelation)) ++g.report.na_edges;
    if (set_edge(Schema::kNaRelation, g.type_node(t))) ++g.report.na_edges;
  }
  for (int i = 0; i < n; ++i)
    if (set_edge(i, i)) ++g.report.self_loops;

  return g;
}

// True when the instance's entity types contradict the relation's known
// constraints: the head type must be an allowed predecessor and the tail type
// an allowed successor. NA never violates, and a relation with no recorded
// constraints has nothing to violate.
inline bool check_constraint_violation(int head_type, int tail_type,
                                       const ConstraintGraph& g, int relation) {
  if (relation == Schema::kNaRelation) return false;
  if (head_type < 0 || head_type >= g.num_types() || tail_type < 0 ||
      tail_type >= g.num_types())
    throw DomainError("check_constraint_violation: type id out of range");
  const auto& p = g.predecessors(relation);
  const auto& s = g.successors(relation);
  if (p.empty() && s.empty()) return false;
  return !(g.allows_head(relation, head_type) &&
           g.allows_tail(relation, tail_type));
}

inline bool check_constraint_violation(const Instance& inst,
                                       const ConstraintGraph& g, int relation) {
  return check_constraint_violation(inst.head_type, inst.tail_type, g, relation);
}

inline bool check_constraint_violation(const EncodedInstance& inst,
                                       const ConstraintGraph& g, int relation) {
  return check_constraint_violation(inst.head_type, inst.tail_type, g, relation);
}

}  // namespace cgre
