#pragma once

#include <algorithm>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "cgre/corpus.hpp"
#include "cgre/rng.hpp"

namespace cgre {

// One scored candidate fact. NA never appears here: it is the absence of a
// fact, not a predictable one.
struct Prediction {
  std::string pair_id;
  int relation = 0;
  double score = 0.0;
};

// Predictions in a total deterministic order (score desc, then pair id, then
// relation id) plus the gold facts they are judged against.
struct RankedPredictions {
  std::vector<Prediction> items;
  std::map<std::string, std::set<int>> gold;  // pair -> non-NA relations
  int total_positive_facts = 0;

  bool is_correct(const Prediction& p) const {
    auto it = gold.find(p.pair_id);
    return it != gold.end() && it->second.count(p.relation) > 0;
  }
};

inline RankedPredictions rank_predictions(
    std::vector<Prediction> preds,
    const std::map<std::string, std::set<int>>& gold) {
  RankedPredictions rp;
  std::set<std::pair<std::string, int>> seen;
  for (Prediction& p : preds) {
    if (p.relation == Schema::kNaRelation)
      throw DomainError("rank_predictions: NA cannot be a positive prediction");
    if (!seen.emplace(p.pair_id, p.relation).second)
      throw DomainError("rank_predictions: candidate fact (" + p.pair_id +
                        ", " + std::to_string(p.relation) + ") scored twice");
    rp.items.push_back(std::move(p));
  }
  std::sort(rp.items.begin(), rp.items.end(),
            [](const Prediction& a, const Prediction& b) {
              if (a.score != b.score) return a.score > b.score;
              if (a.pair_id != b.pair_id) return a.pair_id < b.pair_id;
              return a.relation < b.relation;
            });
  rp.gold = gold;
  for (auto& [pair, rels] : rp.gold) {
    if (rels.count(Schema::kNaRelation))
      throw DomainError("rank_predictions: NA in the gold set of " + pair);
    rp.total_positive_facts += static_cast<int>(rels.size());
  }
  return rp;
}

// Gold facts of an evaluation corpus: every non-NA label of every bag.
inline std::map<std::string, std::set<int>> gold_facts(
    const std::vector<EncodedBag>& bags) {
  std::map<std::string, std::set<int>> gold;
  for (const EncodedBag& bag : bags)
    for (int r : bag.label_set)
      if (r != Schema::kNaRelation) gold[bag.pair_id()].insert(r);
  return gold;
}

struct PrPoint {
  double precision = 0.0;
  double recall = 0.0;
};

// One point per ranking prefix: precision over the prefix, recall against the
// total gold fact count.
inline std::vector<PrPoint> pr_curve(const RankedPredictions& rp) {
  if (rp.total_positive_facts < 1)
    throw DomainError("pr_curve: no positive gold facts");
  if (rp.items.empty()) throw DomainError("pr_curve: no predictions");
  std::vector<PrPoint> points;
  points.reserve(rp.items.size());
  int correct = 0;
  for (std::size_t i = 0; i < rp.items.size(); ++i) {
    if (rp.is_correct(rp.items[i])) ++correct;
    PrPoint p;
    p.precision = static_cast<double>(correct) / static_cast<double>(i + 1);
    p.recall = static_cast<double>(correct) /
               static_cast<double>(rp.total_positive_facts);
    points.push_back(p);
  }
  return points;
}

// Trapezoidal area under precision as a function of recall, clamped to [0,1].
inline double auc(const std::vector<PrPoint>& points) {
  if (points.size() < 2) throw DomainError("auc: need at least 2 points");
  for (std::size_t i = 1; i < points.size(); ++i)
    if (points[i].recall < points[i - 1].recall)
      throw DomainError("auc: points must be sorted by ascending recall");
  double area = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i)
    area += (points[i].recall - points[i - 1].recall) *
            (points[i].precision + points[i - 1].precision) / 2.0;
  return std::clamp(area, 0.0, 1.0);
}

inline double precision_at_n(const RankedPredictions& rp, int n) {
  if (n < 1 || static_cast<std::size_t>(n) > rp.items.size())
    throw DomainError("precision_at_n: N outside 1.." +
                      std::to_string(rp.items.size()));
  int correct = 0;
  for (int i = 0; i < n; ++i)
    if (rp.is_correct(rp.items[static_cast<std::size_t>(i)])) ++correct;
  return static_cast<double>(correct) / static_cast<double>(n);
}

// Non-NA relations with fewer training instances than the threshold.
struct LongTailBucket {
  int threshold = 0;
  std::vector<int> relations;  // ascending
};

inline std::vector<int> relation_instance_counts(
    const std::vector<Instance>& instances, int n_r) {
  std::vector<int> counts(static_cast<std::size_t>(n_r), 0);
  for (const Instance& inst : instances) {
    if (inst.relation < 0 || inst.relation >= n_r)
      throw DomainError("relation_instance_counts: relation id out of range");
    ++counts[static_cast<std::size_t>(inst.relation)];
  }
  return counts;
}

inline LongTailBucket long_tail_bucket(const std::vector<int>& counts,
                                       int threshold) {
  if (threshold < 1) throw DomainError("long_tail_bucket: threshold must be positive");
  if (counts.empty()) throw DomainError("long_tail_bucket: no relation counts");
  LongTailBucket bucket;
  bucket.threshold = threshold;
  for (std::size_t r = 1; r < counts.size(); ++r)  // NA is not a relation
    if (counts[r] < threshold) bucket.relations.push_back(static_cast<int>(r));
  return bucket;
}

// Relations in best-first order; ties go to the lower id so the order is total.
inline std::vector<int> ranking_from_scores(const Tensor& scores) {
  if (scores.ndim() != 1 || scores.shape[0] < 1)
    throw ShapeError("ranking_from_scores: need a score vector");
  std::vector<int> order(static_cast<std::size_t>(scores.shape[0]));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return scores.at(static_cast<std::size_t>(a)) >
           scores.at(static_cast<std::size_t>(b));
  });
  return order;
}

// A test bag's full relation ranking and its non-NA gold labels.
struct RankedBag {
  std::vector<int> ranking;
  std::vector<int> gold;
};

// Per bucket relation: the fraction of its test bags ranking it in the top K.
// The macro value averages over bucket relations that have at least one bag.
inline double hits_at_k_macro(const std::vector<RankedBag>& bags,
                              const LongTailBucket& bucket, int k) {
  if (bucket.relations.empty())
    throw DomainError("hits_at_k_macro: empty long-tail bucket");
  if (k < 1) throw DomainError("hits_at_k_macro: K must be positive");
  double sum = 0.0;
  int covered = 0;
  for (int r : bucket.relations) {
    int total = 0, hits = 0;
    for (const RankedBag& bag : bags) {
      if (!std::count(bag.gold.begin(), bag.gold.end(), r)) continue;
      ++total;
      const auto stop = bag.ranking.begin() +
                        std::min<std::ptrdiff_t>(k, static_cast<std::ptrdiff_t>(
                                                        bag.ranking.size()));
      if (std::find(bag.ranking.begin(), stop, r) != stop) ++hits;
    }
    if (total == 0) continue;
    sum += static_cast<double>(hits) / static_cast<double>(total);
    ++covered;
  }
  if (covered == 0)
    throw DomainError("hits_at_k_macro: no bucket relation has a test bag");
  return sum / static_cast<double>(covered);
}

// Attention weights of one bag next to its per-sentence validity flags.
struct ScoredBag {
  std::vector<double> weights;
  std::vector<std::optional<bool>> valid;
};

// Fraction of (valid, noisy) sentence pairs where the valid sentence holds the
// strictly larger attention weight, averaged over bags that contain both
// kinds. Sentences without a flag join neither side.
inline double attention_accuracy(const std::vector<ScoredBag>& bags) {
  double sum = 0.0;
  int qualifying = 0;
  for (const ScoredBag& bag : bags) {
    if (bag.weights.size() != bag.valid.size())
      throw ShapeError("attention_accuracy: weights/flags length mismatch");
    std::vector<std::size_t> valid_idx, noisy_idx;
    for (std::size_t i = 0; i < bag.valid.size(); ++i) {
      if (!bag.valid[i]) continue;
      (*bag.valid[i] ? valid_idx : noisy_idx).push_back(i);
    }
    if (valid_idx.empty() || noisy_idx.empty()) continue;
    int above = 0;
    for (std::size_t j : valid_idx)
      for (std::size_t k : noisy_idx)
        if (bag.weights[j] > bag.weights[k]) ++above;
    sum += static_cast<double>(above) /
           static_cast<double>(valid_idx.size() * noisy_idx.size());
    ++qualifying;
  }
  if (qualifying == 0)
    throw DomainError("attention_accuracy: no bag has both valid and noisy sentences");
  return sum / static_cast<double>(qualifying);
}

// Controlled test-set constructions. Size splits keep only pairs with more
// than two sentences and sample 1/2/all of them; validity splits rebuild each
// bag with zero/one/all of its valid sentences (noisy ones stay except under
// `all`). Outputs are always instance subsets of the inputs.
enum class SplitMode {
  size_one,
  size_two,
  size_all,
  zero_valid,
  one_valid,
  all_valid
};

inline const char* to_string(SplitMode m) {
  switch (m) {
    case SplitMode::size_one: return "one";
    case SplitMode::size_two: return "two";
    case SplitMode::size_all: return "all";
    case SplitMode::zero_valid: return "zero";
    case SplitMode::one_valid: return "one-valid";
    case SplitMode::all_valid: return "all-valid";
  }
  return "?";
}

namespace detail {

inline EncodedBag take_instances(const EncodedBag& bag,
                                 std::vector<std::size_t> idx) {
  std::sort(idx.begin(), idx.end());  // preserve sentence order
  EncodedBag out;
  out.head = bag.head;
  out.tail = bag.tail;
  out.label_set = bag.label_set;
  for (std::size_t i : idx) {
    out.instances.push_back(bag.instances[i]);
    out.valid.push_back(bag.valid[i]);
  }
  return out;
}

}  // namespace detail

inline std::vector<EncodedBag> build_eval_splits(
    const std::vector<EncodedBag>& bags, SplitMode mode, Rng& rng) {
  std::vector<EncodedBag> out;
  for (const EncodedBag& bag : bags) {
    const std::size_t n = bag.instances.size();
    if (mode == SplitMode::size_one || mode == SplitMode::size_two ||
        mode == SplitMode::size_all) {
      if (n <= 2) continue;
      std::vector<std::size_t> idx(n);
      std::iota(idx.begin(), idx.end(), std::size_t{0});
      if (mode != SplitMode::size_all) {
        rng.shuffle(idx);
        idx.resize(mode == SplitMode::size_one ? 1 : 2);
      }
      out.push_back(detail::take_instances(bag, std::move(idx)));
      continue;
    }

    std::vector<std::size_t> valid_idx, noisy_idx;
    for (std::size_t i = 0; i < n; ++i) {
      if (!bag.valid[i])
        throw SchemaError("build_eval_splits: bag '" + bag.pair_id() +
                          "' lacks validity flags");
      (*bag.valid[i] ? valid_idx : noisy_idx).push_back(i);
    }
    std::vector<std::size_t> keep;
    switch (mode) {
      case SplitMode::zero_valid:
        keep = noisy_idx;
        break;
      case SplitMode::one_valid:
        if (!valid_idx.empty()) {
          keep = noisy_idx;
          keep.push_back(valid_idx[rng.below(valid_idx.size())]);
        }
        break;
      case SplitMode::all_valid:
        keep = valid_idx;
        break;
      default:
        break;
    }
    if (keep.empty()) continue;
    out.push_back(detail::take_instances(bag, std::move(keep)));
  }
  if (out.empty())
    throw DomainError("build_eval_splits: split '" +
                      std::string(to_string(mode)) + "' produced no bags");
  return out;
}

// One evaluated bag: the argmax prediction against the non-NA gold labels.
struct BagOutcome {
  int predicted = 0;
  std::vector<int> gold;  // non-NA
};

// Micro F1 over facts. A positive prediction is any non-NA argmax; under the
// zero-valid split a prediction matching the bag's own label is a false
// positive, because no sentence in the bag expresses it.
inline double micro_f1(const std::vector<BagOutcome>& outcomes,
                       bool zero_split = false) {
  int tp = 0, positives = 0, facts = 0;
  for (const BagOutcome& o : outcomes) {
    for (int r : o.gold)
      if (r == Schema::kNaRelation)
        throw DomainError("micro_f1: NA in a gold label set");
    facts += static_cast<int>(o.gold.size());
    if (o.predicted == Schema::kNaRelation) continue;
    ++positives;
    if (!zero_split &&
        std::count(o.gold.begin(), o.gold.end(), o.predicted))
      ++tp;
  }
  if (positives == 0 || facts == 0 || tp == 0) return 0.0;
  const double p = static_cast<double>(tp) / static_cast<double>(positives);
  const double r = static_cast<double>(tp) / static_cast<double>(facts);
  return 2.0 * p * r / (p + r);
}

}  // namespace cgre
