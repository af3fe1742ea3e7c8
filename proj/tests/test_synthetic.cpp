#include <gtest/gtest.h>

#include <filesystem>
#include <set>
#include <sstream>
#include <utility>

#include "cgre/evaluation.hpp"
#include "cgre/synthetic.hpp"

using namespace cgre;

namespace {

std::string render(const Fixture& f) {
  std::ostringstream os;
  for (const auto& r : f.schema.relations()) os << r << "\n";
  for (const auto& t : f.schema.types()) os << t << "\n";
  os << f.constraints_tsv;
  write_instances(os, f.train, f.schema);
  write_instances(os, f.test, f.schema);
  return os.str();
}

ConstraintGraph graph_of(const Fixture& f, const std::string& name) {
  std::filesystem::path p = std::filesystem::path(::testing::TempDir()) / name;
  std::ofstream os(p);
  os << f.constraints_tsv;
  os.close();
  return build_constraint_graph(f.schema, p.string());
}

bool has_cue(const Instance& inst) {
  for (const auto& t : inst.tokens)
    if (t.find("cue") != std::string::npos) return true;
  return false;
}

}  // namespace

TEST(Fixtures, SameSeedSameFixture) {
  for (FixtureKind k :
       {FixtureKind::overfit, FixtureKind::longtail, FixtureKind::attention}) {
    EXPECT_EQ(render(make_fixture(k, 11)), render(make_fixture(k, 11)))
        << to_string(k);
    EXPECT_NE(render(make_fixture(k, 11)), render(make_fixture(k, 12)))
        << to_string(k);
  }
}

TEST(Fixtures, KindNamesRoundTrip) {
  for (FixtureKind k :
       {FixtureKind::overfit, FixtureKind::longtail, FixtureKind::attention})
    EXPECT_EQ(parse_fixture_kind(to_string(k)), k);
  EXPECT_THROW(parse_fixture_kind("bogus"), ConfigError);
}

TEST(OverfitFixture, TwoHundredSeparableTrainingBags) {
  Fixture f = make_overfit_fixture(3);
  EXPECT_EQ(f.schema.num_relations(), 5);
  auto bags = group_bags(f.train, BagMode::train);
  EXPECT_EQ(bags.size(), 200u);

  ConstraintGraph g = graph_of(f, "overfit.tsv");
  int per_class[5] = {0, 0, 0, 0, 0};
  for (const Bag& b : bags) {
    ASSERT_EQ(b.label_set.size(), 1u);
    ++per_class[b.label_set[0]];
    for (const Instance& inst : b.instances) {
      // labels follow the cue and the type signature exactly
      EXPECT_EQ(has_cue(inst), inst.relation != Schema::kNaRelation);
      EXPECT_FALSE(check_constraint_violation(inst, g, inst.relation));
      if (inst.relation != Schema::kNaRelation) {
        EXPECT_EQ(inst.head_type, inst.relation - 1);
        EXPECT_EQ(inst.tail_type, inst.relation % 4);
      }
    }
  }
  for (int c = 0; c < 5; ++c) EXPECT_EQ(per_class[c], 40);
}

TEST(OverfitFixture, EveryBagIsAFreshPair) {
  Fixture f = make_overfit_fixture(3);
  auto train = group_bags(f.train, BagMode::train);
  auto test = group_bags(f.test, BagMode::eval);
  std::set<std::string> pairs;
  for (const Bag& b : train) EXPECT_TRUE(pairs.insert(b.pair_id()).second);
  for (const Bag& b : test) EXPECT_TRUE(pairs.insert(b.pair_id()).second);
}

TEST(LongtailFixture, TailRelationsStayRare) {
  Fixture f = make_longtail_fixture(5);
  EXPECT_EQ(f.schema.num_relations(), 16);

  auto counts = relation_instance_counts(f.train, f.schema.num_relations());
  LongTailBucket bucket = long_tail_bucket(counts, 11);
  std::vector<int> tails;
  for (int r = 6; r <= 15; ++r) tails.push_back(r);
  EXPECT_EQ(bucket.relations, tails);

  auto bags = group_bags(f.train, BagMode::train);
  int bag_count[16] = {};
  for (const Bag& b : bags) ++bag_count[b.label_set[0]];
  for (int r = 1; r <= 5; ++r) EXPECT_EQ(bag_count[r], 30);
  for (int r = 6; r <= 15; ++r) EXPECT_LE(bag_count[r], 10);
  EXPECT_EQ(bag_count[0], 30);
}

TEST(LongtailFixture, TypePairDisambiguatesSharedCues) {
  Fixture f = make_longtail_fixture(5);
  ConstraintGraph g = graph_of(f, "longtail.tsv");

  // exactly one allowed type on each side, and no two relations share a pair
  std::set<std::pair<int, int>> sigs;
  for (int r = 1; r <= 15; ++r) {
    ASSERT_EQ(g.predecessors(r).size(), 1u);
    ASSERT_EQ(g.successors(r).size(), 1u);
    EXPECT_TRUE(sigs.insert({g.predecessors(r)[0], g.successors(r)[0]}).second);
  }

  // tail relations 6..15 share a cue pairwise; the cue alone is ambiguous
  std::map<std::string, std::set<int>> cue_relations;
  for (const Instance& inst : f.train)
    for (const auto& t : inst.tokens)
      if (t.rfind("tcue", 0) == 0) cue_relations[t].insert(inst.relation);
  EXPECT_EQ(cue_relations.size(), 5u);
  for (const auto& [cue, rels] : cue_relations) EXPECT_EQ(rels.size(), 2u) << cue;

  for (const Instance& inst : f.train)
    EXPECT_FALSE(check_constraint_violation(inst, g, inst.relation));
}

TEST(LongtailFixture, TestSetCoversEveryTailRelation) {
  Fixture f = make_longtail_fixture(5);
  auto bags = group_bags(f.test, BagMode::eval);
  int bag_count[16] = {};
  for (const Bag& b : bags) {
    ASSERT_EQ(b.label_set.size(), 1u);
    ++bag_count[b.label_set[0]];
  }
  for (int r = 6; r <= 15; ++r) EXPECT_EQ(bag_count[r], 5);
}

TEST(AttentionFixture, BagsMixFlaggedValidAndViolatingSentences) {
  Fixture f = make_attention_fixture(9);
  ConstraintGraph g = graph_of(f, "attention.tsv");

  for (const Instance& inst : f.train) EXPECT_FALSE(inst.valid.has_value());

  auto bags = group_bags(f.test, BagMode::eval);
  EXPECT_EQ(bags.size(), 30u);
  for (const Bag& b : bags) {
    ASSERT_EQ(b.instances.size(), 4u);
    ASSERT_EQ(b.label_set.size(), 1u);
    const int label = b.label_set[0];
    int n_valid = 0, n_noisy = 0;
    for (const Instance& inst : b.instances) {
      ASSERT_TRUE(inst.valid.has_value());
      const bool violates = check_constraint_violation(inst, g, label);
      if (*inst.valid) {
        ++n_valid;
        EXPECT_FALSE(violates);
        EXPECT_TRUE(has_cue(inst));
      } else {
        ++n_noisy;
        EXPECT_TRUE(violates);
        EXPECT_FALSE(has_cue(inst));
      }
    }
    EXPECT_EQ(n_valid, 2);
    EXPECT_EQ(n_noisy, 2);
  }
}

TEST(Fixtures, WriteFixtureRoundTrips) {
  Fixture f = make_longtail_fixture(21);
  std::filesystem::path dir =
      std::filesystem::path(::testing::TempDir()) / "fixture_out";
  write_fixture(dir.string(), f);

  Schema schema = Schema::load((dir / "relations.txt").string(),
                               (dir / "types.txt").string());
  EXPECT_EQ(schema.hash(), f.schema.hash());

  auto train = parse_instances((dir / "train.jsonl").string(), schema);
  auto test = parse_instances((dir / "test.jsonl").string(), schema);
  std::ostringstream a, b;
  write_instances(a, train, schema);
  write_instances(b, f.train, f.schema);
  EXPECT_EQ(a.str(), b.str());
  a.str("");
  b.str("");
  write_instances(a, test, schema);
  write_instances(b, f.test, f.schema);
  EXPECT_EQ(a.str(), b.str());

  ConstraintGraph g =
      build_constraint_graph(schema, (dir / "constraints.tsv").string());
  EXPECT_EQ(g.report.accepted, 15);
  EXPECT_EQ(g.report.rejected, 0);
}
