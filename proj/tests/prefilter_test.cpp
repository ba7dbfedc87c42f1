#include <gtest/gtest.h>

#include <map>
#include <random>

#include "gridjoin/prefilter.hpp"
#include "test_util.hpp"

namespace gridjoin {
namespace {

using testing::key_table;
using testing::sorted;

std::vector<Row> equi_oracle(const Table& s, const Table& t) {
  std::multimap<Key, std::size_t> by_key;
  for (std::size_t j = 0; j < t.cardinality(); ++j) by_key.emplace(t.key(j), j);
  std::vector<Row> out;
  for (std::size_t i = 0; i < s.cardinality(); ++i) {
    auto [lo, hi] = by_key.equal_range(s.key(i));
    for (auto it = lo; it != hi; ++it) {
      Row row = s.rows()[i];
      const auto& tr = t.rows()[it->second];
      row.insert(row.end(), tr.begin(), tr.end());
      out.push_back(std::move(row));
    }
  }
  return sorted(out);
}

std::vector<Key> merge_oracle(const Table& s, const Table& t) {
  std::vector<Key> a, b, out;
  for (std::size_t i = 0; i < s.cardinality(); ++i) a.push_back(s.key(i));
  for (std::size_t i = 0; i < t.cardinality(); ++i) b.push_back(t.key(i));
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  a.erase(std::unique(a.begin(), a.end()), a.end());
  b.erase(std::unique(b.begin(), b.end()), b.end());
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(),
                        std::back_inserter(out));
  return out;
}

const std::vector<std::string> kAll;

TEST(KeyIntersection, SmallExamples) {
  const auto s = key_table({1, 2, 3, 3}), t = key_table({4, 3, 2});
  const auto ix = round1_key_intersection(s, t, {3, 1}, WorkerPool(2));
  EXPECT_EQ(ix.keys, (std::vector<Key>{2, 3}));
  EXPECT_TRUE(ix.contains(3));
  EXPECT_FALSE(ix.contains(1));
  const auto none =
      round1_key_intersection(key_table({1}), key_table({2}), {1, 1}, WorkerPool(1));
  EXPECT_EQ(none.size(), 0u);
}

TEST(KeyIntersection, MatchesSortMerge) {
  std::mt19937_64 rng(123);
  const auto s = testing::random_table(rng, 10000, 0, 4999, 0);
  const auto t = testing::random_table(rng, 10000, 0, 4999, 0);
  const auto ix = round1_key_intersection(s, t, {8, 1}, WorkerPool(4));
  EXPECT_EQ(ix.keys, merge_oracle(s, t));
}

TEST(Round2, KeepsOnlySharedKeysAndProjects) {
  std::vector<Key> ten(10);
  for (Key i = 0; i < 10; ++i) ten[i] = i + 1;
  const auto s = key_table(ten, "s"), t = key_table({2, 4, 11, 12}, "t");
  const auto ix = round1_key_intersection(s, t, {3, 1}, WorkerPool(1));
  const std::vector<std::string> keys_only_s{"sk"};
  const auto parts = round2_filter_and_route(s, t, ix, keys_only_s, kAll, {3, 1});
  std::size_t survivors = 0, last_reducer = 0;
  bool first = true;
  for (const auto& p : parts) {
    survivors += p.nb_s + p.nb_t;
    EXPECT_EQ(p.s_block.schema.size(), 1u);
    EXPECT_EQ(p.t_block.schema.size(), 2u);
    for (Key k : p.s_block.key_column) EXPECT_TRUE(ix.contains(k));
    for (Key k : p.t_block.key_column) EXPECT_TRUE(ix.contains(k));
    if (!first) EXPECT_LT(last_reducer, p.reducer_index);
    last_reducer = p.reducer_index;
    first = false;
  }
  EXPECT_EQ(survivors, 4u);
}

TEST(Round2, EmptyIntersectionYieldsNoPartitions) {
  const auto s = key_table({1, 2}), t = key_table({3});
  EXPECT_TRUE(round2_filter_and_route(s, t, KeyIntersection{}, kAll, kAll, {4, 1})
                  .empty());
}

TEST(Round2, CountsMatchGroupOracle) {
  std::mt19937_64 rng(6);
  const auto s = testing::random_table(rng, 3000, -500, 500, 1, "s");
  const auto t = testing::random_table(rng, 2000, -500, 500, 1, "t");
  const ShufflePlan plan{5, 37};
  const auto ix = round1_key_intersection(s, t, plan, WorkerPool(2));
  std::vector<std::size_t> want_s(5, 0), want_t(5, 0);
  for (std::size_t i = 0; i < s.cardinality(); ++i)
    if (ix.contains(s.key(i))) ++want_s[route_group(s.key(i), plan).reducer];
  for (std::size_t i = 0; i < t.cardinality(); ++i)
    if (ix.contains(t.key(i))) ++want_t[route_group(t.key(i), plan).reducer];
  std::vector<std::size_t> got_s(5, 0), got_t(5, 0);
  for (const auto& p : round2_filter_and_route(s, t, ix, kAll, kAll, plan)) {
    got_s[p.reducer_index] = p.nb_s;
    got_t[p.reducer_index] = p.nb_t;
    for (Key k : p.s_block.key_column)
      EXPECT_EQ(route_group(k, plan).reducer, p.reducer_index);
  }
  EXPECT_EQ(got_s, want_s);
  EXPECT_EQ(got_t, want_t);
}

TEST(Round2, RejectsProjectionWithoutKey) {
  const auto s = key_table({1}, "s");
  const std::vector<std::string> no_key{"sid"};
  EXPECT_THROW(round2_filter_and_route(s, s, KeyIntersection{{1}}, no_key, kAll, {1, 1}),
               Error);
}

EquiJoinOptions options(EquiAlgo algo) {
  EquiJoinOptions o;
  o.algo = algo;
  o.plan = {4, 10};
  o.grid = GridConfig{2, 2, 4, 4};
  return o;
}

TEST(FilteredEquiJoin, SingleMatch) {
  const auto s = key_table({1, 2}, "s"), t = key_table({1, 3}, "t");
  for (auto algo : {EquiAlgo::NestedLoop, EquiAlgo::Hash}) {
    const auto out = filtered_equi_join(s, t, kAll, kAll, options(algo), WorkerPool(1));
    ASSERT_EQ(out.result.total, 1u);
    EXPECT_EQ(out.result.rows[0],
              (Row{Key{1}, std::string("s0"), Key{1}, std::string("t0")}));
    EXPECT_EQ(out.stats.tuples_after_filter, 2u);
    EXPECT_EQ(out.stats.estimate.r_size, 1u);
  }
}

TEST(FilteredEquiJoin, DisjointKeysLaunchNothing) {
  const auto s = key_table({1, 2}, "s"), t = key_table({3, 4}, "t");
  const auto out =
      filtered_equi_join(s, t, kAll, kAll, options(EquiAlgo::Hash), WorkerPool(1));
  EXPECT_EQ(out.result.total, 0u);
  EXPECT_EQ(out.stats.kernel.launches, 0u);
  EXPECT_EQ(out.stats.tuples_after_filter, 0u);
  EXPECT_TRUE(out.stats.estimate.degenerate);
}

TEST(FilteredEquiJoin, MatchesOracleForBothKernels) {
  const auto s = gen_synthetic(2000, 20000, 10, 1, 31);
  const auto t = gen_synthetic(2000, 20000, 10, 1, 32);
  const auto want = equi_oracle(s, t);
  ASSERT_GT(want.size(), 0u);
  for (auto algo : {EquiAlgo::NestedLoop, EquiAlgo::Hash}) {
    const auto out = filtered_equi_join(s, t, kAll, kAll, options(algo), WorkerPool(4));
    EXPECT_EQ(sorted(out.result.rows), want);
    EXPECT_GE(out.stats.estimate.r_size, out.result.total);
    EXPECT_EQ(out.intersection.keys, merge_oracle(s, t));
    EXPECT_LE(out.stats.tuples_after_filter, out.stats.tuples_in);
  }
}

TEST(FilteredEquiJoin, HashWithSmallerLeftKeepsSideOrder) {
  // S is the smaller side here, so it becomes the build table.
  const auto s = key_table({5, 6}, "s"), t = key_table({5, 5, 6, 7, 8}, "t");
  const auto out =
      filtered_equi_join(s, t, kAll, kAll, options(EquiAlgo::Hash), WorkerPool(1));
  ASSERT_EQ(out.result.total, 3u);
  for (const auto& row : out.result.rows)
    EXPECT_EQ(std::get<std::string>(row[1]).front(), 's');
}

TEST(FilteredEquiJoin, PrefilterOffGivesSameRows) {
  std::mt19937_64 rng(9);
  const auto s = testing::random_table(rng, 800, 0, 2000, 1, "s");
  const auto t = testing::random_table(rng, 900, 0, 2000, 1, "t");
  auto on = options(EquiAlgo::Hash);
  auto off = on;
  off.prefilter = false;
  const auto a = filtered_equi_join(s, t, kAll, kAll, on, WorkerPool(2));
  const auto b = filtered_equi_join(s, t, kAll, kAll, off, WorkerPool(2));
  EXPECT_EQ(sorted(a.result.rows), sorted(b.result.rows));
  EXPECT_LT(a.stats.tuples_after_filter, b.stats.tuples_after_filter);
  EXPECT_EQ(b.stats.tuples_after_filter, b.stats.tuples_in);
}

TEST(FilteredEquiJoin, ProjectionAppliesToBothSides) {
  std::mt19937_64 rng(2);
  const auto s = testing::random_table(rng, 200, 0, 50, 2, "s");
  const auto t = testing::random_table(rng, 200, 0, 50, 2, "t");
  const std::vector<std::string> ks{"stxt1", "sk"}, kt{"tk"};
  const auto out =
      filtered_equi_join(s, t, ks, kt, options(EquiAlgo::NestedLoop), WorkerPool(2));
  const auto want = equi_oracle(project(s, ks), project(t, kt));
  EXPECT_EQ(sorted(out.result.rows), want);
  for (const auto& row : out.result.rows) ASSERT_EQ(row.size(), 3u);
}

}  // namespace
}  // namespace gridjoin
