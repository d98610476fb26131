#include <gtest/gtest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "helltrust/dataset.hpp"
#include "helltrust/random.hpp"

using namespace helltrust;

namespace {

RatingDataset parse(const std::string& text, RatingScale scale = {1, 5}) {
  std::istringstream in(text);
  return parse_ratings(in, scale);
}

RatingDataset random_dataset(std::uint64_t seed, std::size_t users, std::size_t items, std::size_t n) {
  Rng rng(seed);
  std::vector<RatingRecord> recs;
  for (std::size_t i = 0; i < n; ++i)
    recs.push_back({static_cast<UserIndex>(rng.below(users)), static_cast<ItemIndex>(rng.below(items)),
                    static_cast<double>(1 + rng.below(5))});
  return RatingDataset::from_records(recs, {1, 5}, users, items);
}

}  // namespace

TEST(ParseRatings, SingleLine) {
  auto ds = parse("1 2 3.5\n", {0.5, 4});
  ASSERT_EQ(ds.size(), 1u);
  EXPECT_EQ(ds.records()[0].user, 0u);
  EXPECT_EQ(ds.records()[0].item, 0u);
  EXPECT_DOUBLE_EQ(ds.records()[0].rating, 3.5);
}

TEST(ParseRatings, SeparatorsCommentsAndTrailingFields) {
  auto ds = parse("# header\n10,20,4,881250949\n\n10\t21\t5\n11 20 1 extra\n");
  EXPECT_EQ(ds.num_users(), 2u);
  EXPECT_EQ(ds.num_items(), 2u);
  EXPECT_EQ(ds.size(), 3u);
  EXPECT_EQ(ds.user_ids().raw(1), "11");
  EXPECT_EQ(ds.item_ids().raw(1), "21");
}

TEST(ParseRatings, FirstAppearanceOrder) {
  auto ds = parse("7 a 1\n3 b 2\n7 c 3\n");
  EXPECT_EQ(*ds.user_ids().find("7"), 0u);
  EXPECT_EQ(*ds.user_ids().find("3"), 1u);
  EXPECT_EQ(*ds.item_ids().find("c"), 2u);
}

TEST(ParseRatings, MalformedLineReportsLineNumber) {
  try {
    parse("1 2 3\n1 x\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
  EXPECT_THROW(parse("1 2 abc\n"), ParseError);
}

TEST(ParseRatings, EmptyInputAndOutOfScale) {
  EXPECT_THROW(parse(""), ParseError);
  EXPECT_THROW(parse("# only comments\n\n"), ParseError);
  try {
    parse("1 1 3\n1 2 6\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(ParseRatings, DuplicateKeepsLastAndCounts) {
  auto ds = parse("1 1 2\n1 2 3\n1 1 5\n");
  EXPECT_EQ(ds.size(), 2u);
  EXPECT_EQ(ds.duplicates(), 1u);
  auto items = ds.user_items(0);
  ASSERT_EQ(items.size(), 2u);
  EXPECT_DOUBLE_EQ(items[0].rating, 5.0);
}

TEST(DatasetStats, HandArithmetic) {
  auto ds = RatingDataset::from_records({{0, 0, 3}, {1, 1, 5}}, {1, 5});
  auto s = dataset_stats(ds);
  EXPECT_EQ(s.num_users, 2u);
  EXPECT_EQ(s.num_items, 2u);
  EXPECT_DOUBLE_EQ(s.density, 0.5);
  EXPECT_DOUBLE_EQ(s.mean_rating, 4.0);
  EXPECT_THROW(dataset_stats(RatingDataset{}), DomainError);
}

TEST(DatasetStats, CsvRow) {
  auto ds = RatingDataset::from_records({{0, 0, 3}, {1, 1, 5}}, {1, 5});
  std::ostringstream out;
  write_stats_csv(out, "toy", dataset_stats(ds));
  EXPECT_EQ(out.str(), "dataset,N,M,ratings,density,mean\ntoy,2,2,2,0.5,4\n");
}

TEST(DatasetProperty, InvertedIndexesAreExact) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto ds = random_dataset(seed, 30, 40, 300);
    std::size_t by_user = 0, by_item = 0;
    std::set<std::pair<UserIndex, ItemIndex>> pairs;
    for (const auto& r : ds.records()) pairs.insert({r.user, r.item});
    EXPECT_EQ(pairs.size(), ds.size());
    for (UserIndex u = 0; u < ds.num_users(); ++u) {
      auto items = ds.user_items(u);
      by_user += items.size();
      EXPECT_TRUE(std::is_sorted(items.begin(), items.end(),
                                 [](const ItemRating& a, const ItemRating& b) { return a.item < b.item; }));
      for (const auto& e : items) EXPECT_TRUE(pairs.count({u, e.item}));
    }
    for (ItemIndex j = 0; j < ds.num_items(); ++j) {
      by_item += ds.item_users(j).size();
      for (const auto& e : ds.item_users(j)) EXPECT_TRUE(pairs.count({e.user, j}));
    }
    EXPECT_EQ(by_user, ds.size());
    EXPECT_EQ(by_item, ds.size());
  }
}

TEST(DatasetProperty, RemapIsBijection) {
  auto ds = parse("u9 i1 1\nu2 i1 2\nu9 i3 3\nu4 i7 4\n");
  std::set<std::string> raws;
  for (UserIndex u = 0; u < ds.num_users(); ++u) {
    raws.insert(ds.user_ids().raw(u));
    EXPECT_EQ(*ds.user_ids().find(ds.user_ids().raw(u)), u);
  }
  EXPECT_EQ(raws, (std::set<std::string>{"u9", "u2", "u4"}));
}

TEST(ParseTrust, TwoLines) {
  auto ds = parse("1 10 3\n2 10 4\n");
  std::istringstream in("1 2\n2 1\n");
  auto t = parse_trust(in, ds);
  ASSERT_EQ(t.edges.size(), 2u);
  EXPECT_TRUE(t.edges.contains(0, 1));
  EXPECT_TRUE(t.edges.contains(1, 0));
  ASSERT_EQ(t.edges.trusted_by(0).size(), 1u);
  EXPECT_EQ(t.edges.trusted_by(0)[0].trustee, 1u);
  ASSERT_EQ(t.edges.trusters_of(1).size(), 1u);
  EXPECT_EQ(t.edges.trusters_of(1)[0], 0u);
  EXPECT_DOUBLE_EQ(t.edges.edges()[0].weight, 1.0);
}

TEST(ParseTrust, SelfLoopUnknownAndWeights) {
  auto ds = parse("1 10 3\n2 10 4\n");
  std::istringstream in("1 1\n1 99\n2 1 0.5\n");
  auto t = parse_trust(in, ds);
  EXPECT_EQ(t.lines, 3u);
  EXPECT_EQ(t.dropped_self_loops, 1u);
  EXPECT_EQ(t.dropped_unknown, 1u);
  ASSERT_EQ(t.edges.size(), 1u);
  EXPECT_DOUBLE_EQ(t.edges.edges()[0].weight, 0.5);
  EXPECT_FALSE(t.edges.is_symmetric());
}

TEST(ParseTrust, MalformedLine) {
  auto ds = parse("1 10 3\n");
  std::istringstream in("1 1\n7\n");
  try {
    parse_trust(in, ds);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(TrustEdgeList, DensityAndRangeChecks) {
  auto t = TrustEdgeList::build(4, {{0, 1}, {1, 0}, {2, 3}});
  EXPECT_DOUBLE_EQ(t.density(), 3.0 / 12.0);
  EXPECT_THROW(TrustEdgeList::build(2, {{0, 2}}), DomainError);
}

TEST(TrustEdgeList, WriteReadRoundTrip) {
  auto ds = parse("a x 1\nb x 2\nc y 3\n");
  auto t = TrustEdgeList::build(3, {{0, 2}, {2, 0}, {1, 2, 0.25}});
  std::ostringstream out;
  write_trust(out, t, ds);
  EXPECT_EQ(out.str(), "a c 1.0\nb c 0.25\nc a 1.0\n");
  std::istringstream in(out.str());
  EXPECT_EQ(parse_trust(in, ds).edges.edges().size(), 3u);
}

TEST(KFold, SizesAndDeterminism) {
  auto ten = random_dataset(3, 10, 10, 10);
  auto folds = kfold_split(ten, 5, 42);
  for (auto s : folds.fold_sizes()) EXPECT_EQ(s, ten.size() / 5);
  EXPECT_EQ(folds, kfold_split(ten, 5, 42));

  auto seven = RatingDataset::from_records({{0, 0, 1}, {0, 1, 1}, {0, 2, 1}, {1, 0, 1}, {1, 1, 1}, {1, 2, 1}, {2, 0, 1}},
                                           {1, 5});
  auto sizes = kfold_split(seven, 5, 1).fold_sizes();
  std::sort(sizes.begin(), sizes.end(), std::greater<>());
  EXPECT_EQ(sizes, (std::vector<std::size_t>{2, 2, 1, 1, 1}));
}

TEST(KFold, Errors) {
  auto ds = RatingDataset::from_records({{0, 0, 1}, {0, 1, 1}}, {1, 5});
  EXPECT_THROW(kfold_split(ds, 1, 1), DomainError);
  EXPECT_THROW(kfold_split(ds, 3, 1), DomainError);
}

TEST(KFoldProperty, DisjointAndExhaustive) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto ds = random_dataset(seed, 25, 25, 137);
    for (std::size_t k : {2, 3, 5, 10}) {
      auto folds = kfold_split(ds, k, seed * 31);
      std::vector<int> seen(ds.size(), 0);
      for (std::size_t f = 0; f < k; ++f) {
        for (auto p : folds.test_positions(f)) ++seen[p];
        EXPECT_EQ(folds.test_positions(f).size() + folds.train_positions(f).size(), ds.size());
      }
      EXPECT_TRUE(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));
      auto sizes = folds.fold_sizes();
      auto [lo, hi] = std::minmax_element(sizes.begin(), sizes.end());
      EXPECT_LE(*hi - *lo, 1u);
    }
  }
}

TEST(Subset, SharesIdSpace) {
  auto ds = parse("1 1 1\n2 2 2\n3 3 3\n");
  std::vector<std::size_t> pos = {2};
  auto sub = ds.subset(pos);
  EXPECT_EQ(sub.num_users(), 3u);
  EXPECT_EQ(sub.num_items(), 3u);
  EXPECT_EQ(sub.size(), 1u);
  EXPECT_TRUE(sub.user_items(0).empty());
  EXPECT_EQ(sub.user_items(2).size(), 1u);
}

TEST(Rng, DeterministicStreams) {
  Rng a(derive_seed(5, "stage", 1)), b(derive_seed(5, "stage", 1)), c(derive_seed(5, "stage", 2));
  for (int i = 0; i < 100; ++i) {
    auto x = a.next();
    EXPECT_EQ(x, b.next());
    (void)c;
  }
  EXPECT_NE(derive_seed(5, "stage", 1), derive_seed(5, "stage", 2));
  EXPECT_NE(derive_seed(5, "kfold"), derive_seed(5, "init"));
}

TEST(Rng, BelowStaysInRange) {
  Rng r(9);
  std::vector<int> hist(7, 0);
  for (int i = 0; i < 70000; ++i) ++hist[r.below(7)];
  for (int h : hist) EXPECT_NEAR(h, 10000, 500);
}
