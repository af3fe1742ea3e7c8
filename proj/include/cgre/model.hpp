#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cgre/constraint_graph.hpp"
#include "cgre/corpus.hpp"
#include "cgre/graph_encoder.hpp"
#include "cgre/sentence_encoder.hpp"

namespace cgre {

// Model families sharing the sentence encoder and selective attention:
//   cgre       - graph-encoded relation/type nodes drive attention queries,
//                instance representations carry entity-type node vectors
//   base       - learned per-relation query vectors, sentence-only reps
//   base_type  - base plus learned type embeddings mixed into the reps
//   base_const - base plus hard constraint filtering in training/inference
enum class VariantMode { cgre, base, base_type, base_const };

inline const char* to_string(VariantMode v) {
  switch (v) {
    case VariantMode::cgre: return "cgre";
    case VariantMode::base: return "base";
    case VariantMode::base_type: return "base_type";
    case VariantMode::base_const: return "base_const";
  }
  return "?";
}

inline VariantMode parse_variant(const std::string& s) {
  if (s == "cgre") return VariantMode::cgre;
  if (s == "base") return VariantMode::base;
  if (s == "base_type") return VariantMode::base_type;
  if (s == "base_const") return VariantMode::base_const;
  throw ConfigError("unknown variant '" + s + "'");
}

struct ModelDims {
  int d_w = 50, d_p = 5;
  int kernels = 230, window = 3;
  int max_len = 120;
  double lambda = 17.0, dropout = 0.5;
  // graph encoder (cgre)
  int d_v = 690, gcn_hidden = 750, gcn_layers = 2;
  GcnOutput gcn_output = GcnOutput::last;
  // type embeddings (base_type)
  int type_dim = 50;
};

struct ModelParams {
  Schema schema;
  VariantMode variant = VariantMode::cgre;
  ModelDims dims;
  Vocabulary vocab;
  SentEncoderParams sent;
  GraphEncoderParams graph;                // populated for cgre only
  Tensor query;                            // (n_r, 3m) for the base variants
  Tensor type_emb;                         // (n_t, type_dim) for base_type
  Tensor type_proj_w, type_proj_b;         // mix [s;t1;t2] back to width 3m
  Tensor cls_w, cls_b;                     // (n_r, D), (n_r)

  bool has_graph() const { return variant == VariantMode::cgre; }

  int sentence_dim() const { return sent.sentence_dim(); }

  // Attention/representation width: [s; t_head; t_tail] for cgre (three
  // equal-width parts), the sentence width otherwise.
  int repr_dim() const {
    return variant == VariantMode::cgre ? 3 * sentence_dim() : sentence_dim();
  }

  static ModelParams init(Schema schema, Vocabulary vocab, VariantMode variant,
                          const ModelDims& dims, Rng& rng) {
    if (vocab.d_w != dims.d_w || vocab.d_p != dims.d_p ||
        vocab.max_len != dims.max_len)
      throw ConfigError("model: vocabulary dimensions disagree with the model");
    ModelParams p;
    p.schema = std::move(schema);
    p.variant = variant;
    p.dims = dims;
    p.vocab = std::move(vocab);
    p.vocab.word_emb.set_requires_grad(true);
    p.vocab.pos_emb.set_requires_grad(true);
    p.sent = SentEncoderParams::init(dims.d_w, dims.d_p, dims.kernels,
                                     dims.window, dims.lambda, rng);
    const int m3 = p.sent.sentence_dim();
    const int n_r = p.schema.num_relations();
    const int n_t = p.schema.num_types();
    if (variant == VariantMode::cgre) {
      // Graph node vectors must line up with sentence vectors for the
      // concatenations below, so the encoder output width is pinned to 3m.
      const int nodes = n_r + n_t;
      p.graph = GraphEncoderParams::init(nodes, dims.d_v, dims.gcn_hidden, m3,
                                         dims.gcn_layers, dims.gcn_output, rng);
    } else {
      p.query = xavier_init({n_r, m3}, rng).set_requires_grad(true);
      if (variant == VariantMode::base_type) {
        if (dims.type_dim < 1)
          throw ConfigError("model: type embedding width must be positive");
        p.type_emb =
            xavier_init({n_t, dims.type_dim}, rng).set_requires_grad(true);
        p.type_proj_w = xavier_init({m3 + 2 * dims.type_dim, m3}, rng)
                            .set_requires_grad(true);
        p.type_proj_b = Tensor::zeros({m3}).set_requires_grad(true);
      }
    }
    p.cls_w = xavier_init({n_r, p.repr_dim()}, rng).set_requires_grad(true);
    p.cls_b = Tensor::zeros({n_r}).set_requires_grad(true);
    return p;
  }

  // Fixed-order registry used by the optimizer and the checkpoint format.
  std::vector<std::pair<std::string, Tensor*>> named_params() {
    std::vector<std::pair<std::string, Tensor*>> out;
    out.emplace_back("vocab.word_emb", &vocab.word_emb);
    out.emplace_back("vocab.pos_emb", &vocab.pos_emb);
    sent.push_params(out);
    if (variant == VariantMode::cgre) {
      graph.push_params(out);
    } else {
      out.emplace_back("query", &query);
      if (variant == VariantMode::base_type) {
        out.emplace_back("type.emb", &type_emb);
        out.emplace_back("type.proj_w", &type_proj_w);
        out.emplace_back("type.proj_b", &type_proj_b);
      }
    }
    out.emplace_back("cls.w", &cls_w);
    out.emplace_back("cls.b", &cls_b);
    return out;
  }

  ModelParams clone() const {
    ModelParams copy = *this;
    auto src = const_cast<ModelParams*>(this)->named_params();
    auto dst = copy.named_params();
    for (std::size_t i = 0; i < src.size(); ++i) *dst[i].second = src[i].second->clone();
    copy.vocab.rebuild_index();
    return copy;
  }
};

// [sentence; head type vector; tail type vector] for one instance.
inline Tensor make_instance_repr(const Tensor& s, int head_type, int tail_type,
                                 const Tensor& type_rows) {
  if (type_rows.ndim() != 2 || s.ndim() != 1 ||
      type_rows.shape[1] != s.shape[0])
    throw ShapeError("make_instance_repr: sentence " + s.shape_str() +
                     " vs type rows " + type_rows.shape_str());
  return concat({s, row(type_rows, head_type), row(type_rows, tail_type)});
}

// Constraint-aware query for a relation: the relation node vector
// concatenated with the means of its predecessor and successor type vectors.
// NA averages over every type (its constraint lists are total); a relation
// with no recorded constraints falls back to the same all-types mean.
inline Tensor make_constraint_repr(int relation, const ConstraintGraph& g,
                                   const GraphReprs& reprs) {
  std::vector<int> all_types;
  const std::vector<int>* preds = &g.predecessors(relation);
  const std::vector<int>* succs = &g.successors(relation);
  if (preds->empty() || succs->empty()) {
    all_types.resize(static_cast<std::size_t>(g.num_types()));
    for (int t = 0; t < g.num_types(); ++t) all_types[static_cast<std::size_t>(t)] = t;
    if (preds->empty()) preds = &all_types;
    if (succs->empty()) succs = &all_types;
  }
  return concat({row(reprs.relations, relation), mean_rows(reprs.types, *preds),
                 mean_rows(reprs.types, *succs)});
}

// Selective attention over the stacked instance representations: scores are
// dot products against the query, weights are their softmax, and the bag
// vector is the weight-averaged sum of the representations.
inline std::pair<Tensor, Tensor> bag_attention(const Tensor& g,
                                               const Tensor& query) {
  if (g.ndim() != 2 || g.shape[0] < 1)
    throw DomainError("bag_attention: empty bag");
  if (query.ndim() != 1 || query.shape[0] != g.shape[1])
    throw ShapeError("bag_attention: query " + query.shape_str() +
                     " vs reps " + g.shape_str());
  Tensor alpha = softmax(matvec(g, query));
  Tensor z = weighted_sum_rows(g, alpha);
  return {alpha, z};
}

// Stacks the variant-specific instance representations of a bag. `graph` is
// required (and only used) by the cgre variant.
inline Tensor instance_reprs(const EncodedBag& bag, const ModelParams& p,
                             const GraphReprs* graph) {
  if (bag.instances.empty())
    throw DomainError("instance_reprs: bag '" + bag.pair_id() + "' is empty");
  std::vector<Tensor> reps;
  reps.reserve(bag.instances.size());
  for (const EncodedInstance& inst : bag.instances) {
    Tensor s = encode_sentence(inst, p.vocab, p.sent);
    switch (p.variant) {
      case VariantMode::cgre:
        if (!graph)
          throw DomainError("instance_reprs: graph representations missing");
        reps.push_back(
            make_instance_repr(s, inst.head_type, inst.tail_type, graph->types));
        break;
      case VariantMode::base_type: {
        Tensor mixed = concat({s, row(p.type_emb, inst.head_type),
                               row(p.type_emb, inst.tail_type)});
        reps.push_back(
            add(vecmat(mixed, p.type_proj_w), p.type_proj_b));
        break;
      }
      case VariantMode::base:
      case VariantMode::base_const:
        reps.push_back(s);
        break;
    }
  }
  return stack_rows(reps);
}

// Attention query for a relation: graph-derived for cgre, a learned vector
// otherwise.
inline Tensor attention_query(int relation, const ModelParams& p,
                              const ConstraintGraph& g, const GraphReprs* graph) {
  if (p.variant == VariantMode::cgre) {
    if (!graph) throw DomainError("attention_query: graph representations missing");
    return make_constraint_repr(relation, g, *graph);
  }
  return row(p.query, relation);
}

inline Tensor classifier_logits(const Tensor& z, const ModelParams& p) {
  return add(matvec(p.cls_w, z), p.cls_b);
}

// Mean bag-level cross entropy over a training batch. Dropout is applied to
// the bag vector; the graph (for cgre) is encoded once for the whole batch.
inline Tensor bag_loss(const std::vector<const EncodedBag*>& batch,
                       const ModelParams& p, const ConstraintGraph& g,
                       Rng& rng, bool training = true) {
  if (batch.empty()) throw DomainError("bag_loss: empty batch");
  std::optional<GraphReprs> graph;
  if (p.has_graph()) graph = encode_graph(p.graph, g);
  std::vector<Tensor> losses;
  losses.reserve(batch.size());
  for (const EncodedBag* bag : batch) {
    if (bag->label_set.size() != 1)
      throw DomainError("bag_loss: training bag '" + bag->pair_id() +
                        "' must carry exactly one label");
    const int label = bag->label_set[0];
    Tensor reps = instance_reprs(*bag, p, graph ? &*graph : nullptr);
    Tensor query = attention_query(label, p, g, graph ? &*graph : nullptr);
    auto [alpha, z] = bag_attention(reps, query);
    Tensor mask = dropout_mask(z.shape, p.dims.dropout, rng, training);
    Tensor logits = classifier_logits(mul(z, mask), p);
    losses.push_back(cross_entropy_with_logits(logits, label));
  }
  Tensor loss = scale(add_n(losses), 1.0 / static_cast<double>(losses.size()));
  if (!loss.all_finite())
    throw NumericError("bag_loss: non-finite loss over batch starting at '" +
                       batch.front()->pair_id() + "'");
  return loss;
}

// Precomputed per-model evaluation state: graph representations (cgre) and
// one query per relation.
struct EvalContext {
  std::optional<GraphReprs> graph;
  std::vector<Tensor> queries;
};

inline EvalContext make_eval_context(const ModelParams& p,
                                     const ConstraintGraph& g) {
  NoGradGuard off;
  EvalContext ctx;
  if (p.has_graph()) ctx.graph = encode_graph(p.graph, g);
  ctx.queries.reserve(static_cast<std::size_t>(p.schema.num_relations()));
  for (int r = 0; r < p.schema.num_relations(); ++r)
    ctx.queries.push_back(
        attention_query(r, p, g, ctx.graph ? &*ctx.graph : nullptr));
  return ctx;
}

// True when every sentence in the bag contradicts the relation's constraints.
inline bool bag_violates(const EncodedBag& bag, const ConstraintGraph& g,
                         int relation) {
  for (const EncodedInstance& inst : bag.instances)
    if (!check_constraint_violation(inst, g, relation)) return false;
  return true;
}

// Per-relation bag scores: for each candidate relation the bag is attended
// with that relation's query and scored by the classifier softmax; entry r is
// the probability of r under its own query. For base_const, relations whose
// constraints the whole bag violates score 0, and a bag violating every
// non-NA relation collapses onto NA.
inline Tensor predict_bag(const EncodedBag& bag, const ModelParams& p,
                          const ConstraintGraph& g, const EvalContext& ctx) {
  NoGradGuard off;
  const int n_r = p.schema.num_relations();
  Tensor reps = instance_reprs(bag, p, ctx.graph ? &*ctx.graph : nullptr);
  Tensor scores = Tensor::zeros({n_r});
  for (int r = 0; r < n_r; ++r) {
    auto [alpha, z] = bag_attention(reps, ctx.queries[static_cast<std::size_t>(r)]);
    Tensor probs = softmax(classifier_logits(z, p));
    scores.at(static_cast<std::size_t>(r)) = probs.at(static_cast<std::size_t>(r));
  }
  if (p.variant == VariantMode::base_const) {
    bool any_non_na_allowed = false;
    for (int r = 1; r < n_r; ++r) {
      if (bag_violates(bag, g, r))
        scores.at(static_cast<std::size_t>(r)) = 0.0;
      else
        any_non_na_allowed = true;
    }
    if (!any_non_na_allowed) {
      for (int r = 0; r < n_r; ++r) scores.at(static_cast<std::size_t>(r)) = 0.0;
      scores.at(std::size_t{Schema::kNaRelation}) = 1.0;
    }
  }
  return scores;
}

inline Tensor predict_bag(const EncodedBag& bag, const ModelParams& p,
                          const ConstraintGraph& g) {
  return predict_bag(bag, p, g, make_eval_context(p, g));
}

// Attention weights the bag receives under one relation's query.
inline std::vector<double> bag_attention_weights(const EncodedBag& bag,
                                                 const ModelParams& p,
                                                 const ConstraintGraph& g,
                                                 const EvalContext& ctx,
                                                 int relation) {
  NoGradGuard off;
  if (relation < 0 || relation >= p.schema.num_relations())
    throw DomainError("bag_attention_weights: relation out of range");
  Tensor reps = instance_reprs(bag, p, ctx.graph ? &*ctx.graph : nullptr);
  auto [alpha, z] = bag_attention(reps, ctx.queries[static_cast<std::size_t>(relation)]);
  std::vector<double> out(alpha.numel());
  for (std::size_t i = 0; i < alpha.numel(); ++i) out[i] = alpha.at(i);
  return out;
}

// Argmax with ties resolved toward the lowest relation id.
inline int predicted_relation(const Tensor& scores) {
  if (scores.ndim() != 1 || scores.shape[0] < 1)
    throw ShapeError("predicted_relation: need a score vector");
  int best = 0;
  for (int r = 1; r < scores.shape[0]; ++r)
    if (scores.at(static_cast<std::size_t>(r)) > scores.at(static_cast<std::size_t>(best)))
      best = r;
  return best;
}

}  // namespace cgre
