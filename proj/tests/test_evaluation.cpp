#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "cgre/evaluation.hpp"
#include "oracles.hpp"

using namespace cgre;

namespace {

RankedPredictions two_item_ranking() {
  std::map<std::string, std::set<int>> gold{{"a", {1}}, {"b", {2}}};
  std::vector<Prediction> preds{{"a", 1, 0.9}, {"a", 2, 0.8}};
  return rank_predictions(preds, gold);
}

// Random gold table and prediction list over a handful of pairs/relations.
RankedPredictions random_case(Rng& rng, int* facts_out = nullptr) {
  std::map<std::string, std::set<int>> gold;
  const int n_pairs = 2 + static_cast<int>(rng.below(5));
  for (int p = 0; p < n_pairs; ++p) {
    std::string pair = "p" + std::to_string(p);
    for (int r = 1; r <= 4; ++r)
      if (rng.uniform() < 0.45) gold[pair].insert(r);
    if (gold[pair].empty()) gold.erase(pair);
  }
  if (gold.empty()) gold["p0"] = {1};

  // every (pair, relation) candidate scored at most once
  std::vector<std::pair<int, int>> combos;
  for (int p = 0; p < n_pairs; ++p)
    for (int r = 1; r <= 4; ++r) combos.emplace_back(p, r);
  rng.shuffle(combos);
  const std::size_t n_preds = 3 + rng.below(combos.size() - 3);
  std::vector<Prediction> preds;
  for (std::size_t i = 0; i < n_preds; ++i) {
    Prediction p;
    p.pair_id = "p" + std::to_string(combos[i].first);
    p.relation = combos[i].second;
    p.score = rng.uniform();
    preds.push_back(p);
  }
  RankedPredictions rp = rank_predictions(preds, gold);
  if (facts_out) *facts_out = rp.total_positive_facts;
  return rp;
}

std::vector<std::pair<double, double>> as_pairs(const std::vector<PrPoint>& pts) {
  std::vector<std::pair<double, double>> out;
  for (const PrPoint& p : pts) out.emplace_back(p.precision, p.recall);
  return out;
}

}  // namespace

TEST(Ranking, OrderIsTotalAndDeterministic) {
  std::map<std::string, std::set<int>> gold{{"x", {1}}};
  std::vector<Prediction> preds{
      {"z", 2, 0.5}, {"a", 3, 0.5}, {"a", 1, 0.5}, {"m", 1, 0.7}};
  RankedPredictions rp = rank_predictions(preds, gold);
  ASSERT_EQ(rp.items.size(), 4u);
  EXPECT_EQ(rp.items[0].pair_id, "m");
  EXPECT_EQ(rp.items[1].pair_id, "a");
  EXPECT_EQ(rp.items[1].relation, 1);
  EXPECT_EQ(rp.items[2].relation, 3);
  EXPECT_EQ(rp.items[3].pair_id, "z");
}

TEST(Ranking, NaIsNeverAFact) {
  std::map<std::string, std::set<int>> gold{{"x", {1}}};
  EXPECT_THROW(rank_predictions({{"x", Schema::kNaRelation, 0.9}}, gold),
               DomainError);
  std::map<std::string, std::set<int>> bad{{"x", {0, 1}}};
  EXPECT_THROW(rank_predictions({{"x", 1, 0.9}}, bad), DomainError);
}

TEST(Ranking, GoldFactsComeFromBagLabels) {
  EncodedBag a;
  a.head = "anna";
  a.tail = "oslo";
  a.label_set = {0, 1, 2};
  EncodedBag b;
  b.head = "bert";
  b.tail = "acme";
  b.label_set = {0};
  auto gold = gold_facts({a, b});
  ASSERT_EQ(gold.size(), 1u);
  EXPECT_EQ(gold["anna\toslo"], (std::set<int>{1, 2}));
}

TEST(PrCurve, HandCountedPrefixes) {
  RankedPredictions rp = two_item_ranking();  // 2 facts, [correct, wrong]
  std::vector<PrPoint> pts = pr_curve(rp);
  ASSERT_EQ(pts.size(), 2u);
  EXPECT_DOUBLE_EQ(pts[0].precision, 1.0);
  EXPECT_DOUBLE_EQ(pts[0].recall, 0.5);
  EXPECT_DOUBLE_EQ(pts[1].precision, 0.5);
  EXPECT_DOUBLE_EQ(pts[1].recall, 0.5);
}

TEST(PrCurve, PerfectRankingEndsAtFullRecall) {
  std::map<std::string, std::set<int>> gold{{"a", {1}}, {"b", {2}}};
  RankedPredictions rp =
      rank_predictions({{"a", 1, 0.9}, {"b", 2, 0.8}}, gold);
  std::vector<PrPoint> pts = pr_curve(rp);
  EXPECT_DOUBLE_EQ(pts.back().precision, 1.0);
  EXPECT_DOUBLE_EQ(pts.back().recall, 1.0);
}

TEST(PrCurve, RejectsEmptyInputs) {
  RankedPredictions empty_gold =
      rank_predictions({{"a", 1, 0.5}}, {});
  EXPECT_THROW(pr_curve(empty_gold), DomainError);
  RankedPredictions no_preds = rank_predictions({}, {{"a", {1}}});
  EXPECT_THROW(pr_curve(no_preds), DomainError);
}

TEST(PrCurve, MatchesBruteForcePrefixCounting) {
  Rng rng(2024);
  for (int c = 0; c < 100; ++c) {
    RankedPredictions rp = random_case(rng);
    std::vector<bool> correct;
    for (const Prediction& p : rp.items) correct.push_back(rp.is_correct(p));
    auto expect = oracle::pr_prefixes(correct, rp.total_positive_facts);
    std::vector<PrPoint> got = pr_curve(rp);
    ASSERT_EQ(got.size(), expect.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      EXPECT_NEAR(got[i].precision, expect[i].first, 1e-12);
      EXPECT_NEAR(got[i].recall, expect[i].second, 1e-12);
    }
  }
}

TEST(Auc, PinnedGeometry) {
  EXPECT_DOUBLE_EQ(auc({{1.0, 0.0}, {1.0, 1.0}}), 1.0);
  EXPECT_DOUBLE_EQ(auc({{1.0, 0.0}, {0.0, 1.0}}), 0.5);
  EXPECT_THROW(auc({{1.0, 0.0}}), DomainError);
  EXPECT_THROW(auc({{1.0, 0.5}, {1.0, 0.2}}), DomainError);
}

TEST(Auc, MatchesRiemannSum) {
  Rng rng(31);
  for (int c = 0; c < 100; ++c) {
    RankedPredictions rp = random_case(rng);
    std::vector<PrPoint> pts = pr_curve(rp);
    if (pts.size() < 2) continue;
    const double fine = oracle::riemann_auc(as_pairs(pts), 200000);
    EXPECT_NEAR(auc(pts), fine, 1e-6) << "case " << c;
  }
}

TEST(Auc, DependsOnlyOnTheRanking) {
  Rng rng(77);
  std::map<std::string, std::set<int>> gold{{"a", {1, 2}}, {"b", {3}}};
  std::vector<Prediction> preds;
  for (const char* pair : {"a", "b", "c"})
    for (int r = 1; r <= 4; ++r) preds.push_back({pair, r, rng.uniform()});
  std::vector<Prediction> squashed = preds;
  for (Prediction& p : squashed) p.score = std::exp(3.0 * p.score);  // monotone
  std::vector<PrPoint> before = pr_curve(rank_predictions(preds, gold));
  std::vector<PrPoint> after = pr_curve(rank_predictions(squashed, gold));
  ASSERT_EQ(before.size(), after.size());
  for (std::size_t i = 0; i < before.size(); ++i) {
    EXPECT_DOUBLE_EQ(before[i].precision, after[i].precision);
    EXPECT_DOUBLE_EQ(before[i].recall, after[i].recall);
  }
}

TEST(PrecisionAtN, PinnedAndMonotone) {
  RankedPredictions rp = two_item_ranking();
  EXPECT_DOUBLE_EQ(precision_at_n(rp, 1), 1.0);
  EXPECT_DOUBLE_EQ(precision_at_n(rp, 2), 0.5);
  EXPECT_THROW(precision_at_n(rp, 3), DomainError);
  EXPECT_THROW(precision_at_n(rp, 0), DomainError);

  // all correct predictions rank above all incorrect ones: P@N non-increasing
  std::map<std::string, std::set<int>> gold{{"a", {1, 2, 3}}};
  RankedPredictions sorted_rp = rank_predictions(
      {{"a", 1, 0.9}, {"a", 2, 0.8}, {"a", 4, 0.3}, {"b", 1, 0.2}}, gold);
  double prev = 1.0;
  for (int n = 1; n <= 4; ++n) {
    const double p = precision_at_n(sorted_rp, n);
    EXPECT_LE(p, prev + 1e-15);
    prev = p;
  }
}

TEST(PrecisionAtN, TenItemHandCount) {
  std::map<std::string, std::set<int>> gold{
      {"a", {1, 2}}, {"b", {1}}, {"c", {2}}};
  std::vector<Prediction> preds;
  const bool correct_pattern[10] = {true, true,  false, true,  false,
                                    false, false, true, false, false};
  for (int i = 0; i < 10; ++i) {
    Prediction p;
    if (correct_pattern[i]) {
      p.pair_id = i == 0 || i == 1 ? "a" : (i == 3 ? "b" : "c");
      p.relation = i == 1 || i == 7 ? 2 : 1;
    } else {
      p.pair_id = "nope" + std::to_string(i);
      p.relation = 3;
    }
    p.score = 1.0 - 0.05 * i;
    preds.push_back(p);
  }
  RankedPredictions rp = rank_predictions(preds, gold);
  // hand count: hits among top-5 = 3, top-10 = 4
  EXPECT_DOUBLE_EQ(precision_at_n(rp, 5), 3.0 / 5.0);
  EXPECT_DOUBLE_EQ(precision_at_n(rp, 10), 4.0 / 10.0);
}

TEST(LongTail, BucketFromTrainingCounts) {
  std::vector<Instance> train;
  for (int i = 0; i < 5; ++i) train.push_back({{}, "", "", {}, {}, 0, 0, 1});
  for (int i = 0; i < 3; ++i) train.push_back({{}, "", "", {}, {}, 0, 0, 2});
  train.push_back({{}, "", "", {}, {}, 0, 0, 3});
  std::vector<int> counts = relation_instance_counts(train, 4);
  EXPECT_EQ(counts, (std::vector<int>{0, 5, 3, 1}));

  LongTailBucket b2 = long_tail_bucket(counts, 2);
  EXPECT_EQ(b2.relations, (std::vector<int>{3}));
  LongTailBucket b4 = long_tail_bucket(counts, 4);
  EXPECT_EQ(b4.relations, (std::vector<int>{2, 3}));
  // NA is excluded even with zero instances
  LongTailBucket b100 = long_tail_bucket(counts, 100);
  EXPECT_EQ(b100.relations, (std::vector<int>{1, 2, 3}));
  EXPECT_THROW(long_tail_bucket(counts, 0), DomainError);
  EXPECT_THROW(long_tail_bucket({}, 2), DomainError);
}

TEST(RankingFromScores, TiesGoToTheLowerId) {
  std::vector<int> r = ranking_from_scores(Tensor::vec({0.2, 0.8, 0.8, 0.1}));
  EXPECT_EQ(r, (std::vector<int>{1, 2, 0, 3}));
  EXPECT_THROW(ranking_from_scores(Tensor::matrix({{1.0}})), ShapeError);
}

TEST(HitsAtK, PinnedExamples) {
  LongTailBucket bucket{100, {1, 2}};
  std::vector<RankedBag> bags;
  bags.push_back({{1, 0, 2, 3}, {1}});  // relation 1 ranked 1st
  bags.push_back({{1, 0, 3, 2}, {2}});  // relation 2 ranked last
  EXPECT_DOUBLE_EQ(hits_at_k_macro(bags, bucket, 10), 1.0);  // K covers all
  EXPECT_DOUBLE_EQ(hits_at_k_macro(bags, bucket, 2), 0.5);   // 1.0 and 0.0
  EXPECT_DOUBLE_EQ(hits_at_k_macro(bags, LongTailBucket{100, {1}}, 1), 1.0);

  EXPECT_THROW(hits_at_k_macro(bags, LongTailBucket{100, {}}, 5), DomainError);
  EXPECT_THROW(hits_at_k_macro(bags, bucket, 0), DomainError);
  // bucket relation without any test bag: skipped, not counted as zero
  LongTailBucket sparse{100, {1, 3}};
  std::vector<RankedBag> only_r1{{{1, 0, 2, 3}, {1}}};
  EXPECT_DOUBLE_EQ(hits_at_k_macro(only_r1, sparse, 1), 1.0);
  EXPECT_THROW(hits_at_k_macro(only_r1, LongTailBucket{100, {3}}, 1),
               DomainError);
}

TEST(HitsAtK, FullRankingAlwaysContainsTheLabel) {
  Rng rng(5);
  std::vector<RankedBag> bags;
  for (int b = 0; b < 20; ++b) {
    Tensor scores = Tensor::zeros({6});
    for (std::size_t i = 0; i < 6; ++i) scores.at(i) = rng.uniform();
    bags.push_back({ranking_from_scores(scores),
                    {1 + static_cast<int>(rng.below(5))}});
  }
  LongTailBucket bucket{100, {1, 2, 3, 4, 5}};
  EXPECT_DOUBLE_EQ(hits_at_k_macro(bags, bucket, 6), 1.0);
}

TEST(HitsAtK, MatchesScoreLevelEnumeration) {
  Rng rng(99);
  for (int c = 0; c < 100; ++c) {
    const int n_r = 5;
    std::vector<RankedBag> bags;
    std::vector<Tensor> raw;
    for (int b = 0; b < 8; ++b) {
      Tensor scores = Tensor::zeros({n_r});
      for (std::size_t i = 0; i < static_cast<std::size_t>(n_r); ++i)
        scores.at(i) = rng.below(4) * 0.25;  // deliberate ties
      int gold = 1 + static_cast<int>(rng.below(n_r - 1));
      bags.push_back({ranking_from_scores(scores), {gold}});
      raw.push_back(scores);
    }
    const int k = 1 + static_cast<int>(rng.below(n_r));
    LongTailBucket bucket{100, {1, 2, 3}};

    // independent path: a relation is in the top K iff fewer than K relations
    // strictly outrank it (higher score, or equal score with lower id)
    double sum = 0.0;
    int covered = 0;
    for (int r : bucket.relations) {
      int total = 0, hits = 0;
      for (std::size_t b = 0; b < bags.size(); ++b) {
        if (bags[b].gold[0] != r) continue;
        ++total;
        int ahead = 0;
        for (int q = 0; q < n_r; ++q) {
          if (q == r) continue;
          const double sq = raw[b].at(static_cast<std::size_t>(q));
          const double sr = raw[b].at(static_cast<std::size_t>(r));
          if (sq > sr || (sq == sr && q < r)) ++ahead;
        }
        if (ahead < k) ++hits;
      }
      if (!total) continue;
      sum += static_cast<double>(hits) / total;
      ++covered;
    }
    if (!covered) continue;
    EXPECT_DOUBLE_EQ(hits_at_k_macro(bags, bucket, k), sum / covered)
        << "case " << c;
  }
}

TEST(AttentionAccuracy, PinnedExamples) {
  // one valid sentence above one noisy sentence
  EXPECT_DOUBLE_EQ(attention_accuracy({{{0.7, 0.3}, {true, false}}}), 1.0);
  // ties count as misses: the inequality is strict
  EXPECT_DOUBLE_EQ(attention_accuracy({{{0.5, 0.5}, {true, false}}}), 0.0);
  // 2 valid, 2 noisy: pairs 0.4>0.1, 0.4>0.3, 0.2>0.1 hold; 0.2>0.3 fails
  EXPECT_DOUBLE_EQ(attention_accuracy(
                       {{{0.4, 0.1, 0.3, 0.2}, {true, false, false, true}}}),
                   0.75);
  // bags lacking one of the kinds are skipped
  ScoredBag all_valid{{0.6, 0.4}, {true, true}};
  ScoredBag mixed{{0.7, 0.3}, {true, false}};
  EXPECT_DOUBLE_EQ(attention_accuracy({all_valid, mixed}), 1.0);
  EXPECT_THROW(attention_accuracy({all_valid}), DomainError);
  EXPECT_THROW(attention_accuracy({}), DomainError);
}

TEST(AttentionAccuracy, MatchesLiteralFormula) {
  Rng rng(404);
  for (int c = 0; c < 100; ++c) {
    std::vector<ScoredBag> bags;
    std::vector<std::vector<double>> weights;
    std::vector<std::vector<int>> flags;
    bool any = false;
    const int n_bags = 1 + static_cast<int>(rng.below(6));
    for (int b = 0; b < n_bags; ++b) {
      const int n = 2 + static_cast<int>(rng.below(5));
      ScoredBag bag;
      std::vector<int> f;
      bool has_valid = false, has_noisy = false;
      for (int i = 0; i < n; ++i) {
        bag.weights.push_back(rng.below(5) * 0.2);  // ties likely
        const double u = rng.uniform();
        if (u < 0.15) {
          bag.valid.push_back(std::nullopt);
          f.push_back(-1);
        } else if (u < 0.6) {
          bag.valid.push_back(true);
          f.push_back(1);
          has_valid = true;
        } else {
          bag.valid.push_back(false);
          f.push_back(0);
          has_noisy = true;
        }
      }
      any = any || (has_valid && has_noisy);
      weights.push_back(bag.weights);
      flags.push_back(f);
      bags.push_back(std::move(bag));
    }
    if (!any) continue;
    EXPECT_DOUBLE_EQ(attention_accuracy(bags),
                     oracle::aacc_literal(weights, flags))
        << "case " << c;
  }
}

TEST(EvalSplits, SizeModesSampleSeeded) {
  EncodedBag big;
  big.head = "a";
  big.tail = "b";
  big.label_set = {1};
  for (int i = 0; i < 5; ++i) {
    EncodedInstance inst;
    inst.length = i + 1;  // marks identity
    big.instances.push_back(inst);
    big.valid.push_back(std::nullopt);
  }
  EncodedBag small = big;
  small.head = "c";
  small.instances.resize(2);
  small.valid.resize(2);

  Rng r1(9), r2(9);
  auto one = build_eval_splits({big, small}, SplitMode::size_one, r1);
  ASSERT_EQ(one.size(), 1u);  // 2-sentence bag excluded
  EXPECT_EQ(one[0].instances.size(), 1u);
  auto again = build_eval_splits({big, small}, SplitMode::size_one, r2);
  EXPECT_EQ(one[0].instances[0].length, again[0].instances[0].length);

  Rng r3(9);
  auto two = build_eval_splits({big, small}, SplitMode::size_two, r3);
  ASSERT_EQ(two[0].instances.size(), 2u);
  // order-preserving subset of the original
  EXPECT_LT(two[0].instances[0].length, two[0].instances[1].length);

  Rng r4(9);
  auto all = build_eval_splits({big, small}, SplitMode::size_all, r4);
  EXPECT_EQ(all[0].instances.size(), 5u);

  Rng r5(9);
  EXPECT_THROW(build_eval_splits({small}, SplitMode::size_one, r5), DomainError);
}

TEST(EvalSplits, ValidityModesRebuildBags) {
  EncodedBag bag;
  bag.head = "a";
  bag.tail = "b";
  bag.label_set = {1};
  for (int i = 0; i < 4; ++i) {
    EncodedInstance inst;
    inst.length = i + 1;
    bag.instances.push_back(inst);
  }
  bag.valid = {true, false, true, false};  // lengths 1,3 valid; 2,4 noisy

  Rng rng(3);
  auto zero = build_eval_splits({bag}, SplitMode::zero_valid, rng);
  ASSERT_EQ(zero[0].instances.size(), 2u);
  EXPECT_EQ(zero[0].instances[0].length, 2);
  EXPECT_EQ(zero[0].instances[1].length, 4);

  auto one = build_eval_splits({bag}, SplitMode::one_valid, rng);
  ASSERT_EQ(one[0].instances.size(), 3u);
  int valid_count = 0;
  for (std::size_t i = 0; i < one[0].instances.size(); ++i)
    if (*one[0].valid[i]) ++valid_count;
  EXPECT_EQ(valid_count, 1);

  auto all = build_eval_splits({bag}, SplitMode::all_valid, rng);
  ASSERT_EQ(all[0].instances.size(), 2u);
  EXPECT_EQ(all[0].instances[0].length, 1);
  EXPECT_EQ(all[0].instances[1].length, 3);

  EncodedBag unflagged = bag;
  unflagged.valid[2] = std::nullopt;
  EXPECT_THROW(build_eval_splits({unflagged}, SplitMode::zero_valid, rng),
               SchemaError);
}

TEST(EvalSplits, NeverInventsInstances) {
  EncodedBag bag;
  bag.head = "a";
  bag.tail = "b";
  bag.label_set = {1};
  Rng seed(11);
  for (int i = 0; i < 6; ++i) {
    EncodedInstance inst;
    inst.length = 1 + static_cast<int>(seed.below(9));
    inst.head_pos = i;
    bag.instances.push_back(inst);
    bag.valid.push_back(i % 2 == 0);
  }
  Rng rng(1);
  for (SplitMode m : {SplitMode::size_one, SplitMode::size_two,
                      SplitMode::size_all, SplitMode::zero_valid,
                      SplitMode::one_valid, SplitMode::all_valid}) {
    auto out = build_eval_splits({bag}, m, rng);
    for (const EncodedInstance& inst : out[0].instances) {
      bool found = false;
      for (const EncodedInstance& src : bag.instances)
        found = found || (src.head_pos == inst.head_pos &&
                          src.length == inst.length);
      EXPECT_TRUE(found) << to_string(m);
    }
  }
}

TEST(MicroF1, HandComputedCases) {
  // everything right
  EXPECT_DOUBLE_EQ(micro_f1({{1, {1}}, {2, {2}}}), 1.0);
  // 1 FP and 1 FN: TP=2, positives=3, facts=4 -> F1 = 4/7
  std::vector<BagOutcome> four{
      {1, {1}}, {2, {2}}, {3, {1}}, {Schema::kNaRelation, {2}}};
  EXPECT_DOUBLE_EQ(micro_f1(four), 4.0 / 7.0);
  // no positive predictions
  EXPECT_DOUBLE_EQ(micro_f1({{Schema::kNaRelation, {1}}}), 0.0);
  // NA may not appear among the gold labels
  EXPECT_THROW(micro_f1({{1, {0}}}), DomainError);
}

TEST(MicroF1, ZeroSplitPunishesTheNominalLabel) {
  std::vector<BagOutcome> nominal{{1, {1}}, {2, {2}}};
  EXPECT_DOUBLE_EQ(micro_f1(nominal, /*zero_split=*/true), 0.0);
  EXPECT_DOUBLE_EQ(micro_f1(nominal, /*zero_split=*/false), 1.0);
}
