#include <gtest/gtest.h>

#include <map>
#include <random>

#include "gridjoin/vgpu.hpp"
#include "test_util.hpp"

namespace gridjoin {
namespace {

using testing::key_table;
using testing::sorted;

ColumnarBlock keys_block(const std::vector<Key>& keys,
                         const std::string& prefix = "") {
  return to_columnar(key_table(keys, prefix));
}

// Every (s, t) pair reachable from the plan, with multiplicity.
std::map<std::pair<std::size_t, std::size_t>, int> covered(
    const std::vector<ThreadAssignment>& plan) {
  std::map<std::pair<std::size_t, std::size_t>, int> hits;
  for (const auto& a : plan)
    for (auto i = a.s_range.begin; i < a.s_range.end; ++i)
      for (auto j = a.t_range.begin; j < a.t_range.end; ++j) ++hits[{i, j}];
  return hits;
}

std::vector<Row> brute_force(const Table& s, const Table& t, JoinCondition op) {
  std::vector<Row> out;
  for (std::size_t i = 0; i < s.cardinality(); ++i)
    for (std::size_t j = 0; j < t.cardinality(); ++j)
      if (op(s.key(i), t.key(j))) {
        Row row = s.rows()[i];
        row.insert(row.end(), t.rows()[j].begin(), t.rows()[j].end());
        out.push_back(std::move(row));
      }
  return sorted(out);
}

TEST(PlanNestedLoop, HandEvaluatedCorner) {
  const GridConfig grid{2, 2, 2, 2};
  const auto plan = plan_nested_loop(16, 16, grid);
  ASSERT_EQ(plan.size(), 16u);
  // NB_S = NB_T = 16 / 4 + 1 = 5; thread (1,1,1,1) starts at (1*2+1)*5 = 15.
  const auto& last = plan.back();
  EXPECT_EQ(last.block_index, (std::array<std::size_t, 2>{1, 1}));
  EXPECT_EQ(last.thread_index, (std::array<std::size_t, 2>{1, 1}));
  EXPECT_EQ(last.s_range, (RowRange{15, 16}));
  EXPECT_EQ(last.t_range, (RowRange{15, 16}));
  EXPECT_EQ(last.slot_capacity, 1u);
  EXPECT_EQ(plan.front().s_range, (RowRange{0, 5}));
  EXPECT_EQ(plan.front().slot_capacity, 25u);
}

TEST(PlanNestedLoop, PlusOneOvershootLeavesEmptyRanges) {
  // |S| = 4, m*x = 4: NB_S = 2, so S-threads 2 and 3 start past the end.
  const auto plan = plan_nested_loop(4, 1, GridConfig{2, 1, 2, 1});
  ASSERT_EQ(plan.size(), 4u);
  EXPECT_EQ(plan[0].s_range, (RowRange{0, 2}));
  EXPECT_EQ(plan[1].s_range, (RowRange{2, 4}));
  EXPECT_TRUE(plan[2].s_range.empty());
  EXPECT_TRUE(plan[3].s_range.empty());
  EXPECT_EQ(plan[2].slot_capacity, 0u);
}

TEST(PlanNestedLoop, DegenerateGridCoversEverything) {
  const auto plan = plan_nested_loop(9, 4, GridConfig{});
  ASSERT_EQ(plan.size(), 1u);
  EXPECT_EQ(plan[0].s_range, (RowRange{0, 9}));
  EXPECT_EQ(plan[0].t_range, (RowRange{0, 4}));
  EXPECT_EQ(plan[0].slot_capacity, 36u);
}

TEST(PlanNestedLoop, TilesCrossProductExactlyOnce) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const GridConfig grid{1 + rng() % 3, 1 + rng() % 3, 1 + rng() % 3,
                          1 + rng() % 3};
    const std::size_t ns = rng() % 30, nt = rng() % 30;
    const auto hits = covered(plan_nested_loop(ns, nt, grid));
    ASSERT_EQ(hits.size(), ns * nt);
    for (const auto& [pair, n] : hits) ASSERT_EQ(n, 1);
  }
}

TEST(PlanNestedLoop, RejectsZeroDimension) {
  EXPECT_THROW(plan_nested_loop(1, 1, GridConfig{0, 1, 1, 1}), Error);
}

TEST(NestedLoopKernel, SingleEquiMatch) {
  const auto s = keys_block({1, 2}, "s");
  const auto t = keys_block({2, 3}, "t");
  const auto plan = plan_nested_loop(2, 2, GridConfig{1, 1, 2, 2});
  const auto r = nested_loop_kernel(s, t, plan, {JoinOp::Eq}, WorkerPool(2));
  ASSERT_EQ(r.total, 1u);
  EXPECT_EQ(r.rows[0], (Row{Key{2}, std::string("s1"), Key{2}, std::string("t0")}));
}

TEST(NestedLoopKernel, DisjointKeysProduceNothing) {
  const auto s = keys_block({1, 2, 3});
  const auto t = keys_block({4, 5});
  const auto plan = plan_nested_loop(3, 2, GridConfig{2, 1, 1, 2});
  const auto r = nested_loop_kernel(s, t, plan, {JoinOp::Eq}, WorkerPool(1));
  EXPECT_EQ(r.total, 0u);
  EXPECT_TRUE(r.rows.empty());
  for (auto [id, n] : r.per_thread_counts) EXPECT_EQ(n, 0u);
  EXPECT_EQ(r.per_thread_counts.size(), plan.size());
}

TEST(NestedLoopKernel, MatchesBruteForceForEveryPredicate) {
  std::mt19937_64 rng(500);
  const auto s = testing::random_table(rng, 500, 0, 400, 1, "s");
  const auto t = testing::random_table(rng, 500, 0, 400, 1, "t");
  const auto sb = to_columnar(s), tb = to_columnar(t);
  const auto plan = plan_nested_loop(500, 500, GridConfig{3, 2, 4, 3});
  for (auto op : {JoinOp::Eq, JoinOp::Lt, JoinOp::Le, JoinOp::Gt, JoinOp::Ge,
                  JoinOp::Ne}) {
    const auto r = nested_loop_kernel(sb, tb, plan, {op}, WorkerPool(4));
    EXPECT_EQ(sorted(r.rows), brute_force(s, t, {op})) << to_string(op);
    EXPECT_EQ(r.total, r.rows.size());
    std::size_t sum = 0;
    for (std::size_t i = 0; i < plan.size(); ++i) {
      EXPECT_LE(r.per_thread_counts[i].second, plan[i].slot_capacity);
      sum += r.per_thread_counts[i].second;
    }
    EXPECT_EQ(sum, r.total);
  }
}

TEST(HashTable, InsertsEveryRow) {
  const auto block = keys_block({10, 11, 12, 13});
  const auto ht = build_hash_table(block, 4, 4);
  EXPECT_EQ(ht.size(), 4u);
  EXPECT_EQ(ht.n_buckets(), 4u);
}

TEST(HashTable, DuplicateKeysOverflowSmallBucket) {
  const auto block = keys_block({9, 9, 9});
  try {
    build_hash_table(block, 8, 2);
    FAIL() << "expected BucketOverflow";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BucketOverflow);
    const auto ht = build_hash_table(block, 8, 4);
    EXPECT_EQ(e.detail(), static_cast<std::int64_t>(ht.bucket_of(9)));
  }
}

TEST(HashTable, LargeBuildReplaysAgainstBlock) {
  std::mt19937_64 rng(10);
  std::vector<Key> keys;
  for (int i = 0; i < 10000; ++i) keys.push_back(static_cast<Key>(rng() % 1000000));
  const auto block = keys_block(keys);
  const auto ht = build_hash_table(block, 1024, 64);
  EXPECT_EQ(ht.size(), 10000u);
  std::vector<int> seen(keys.size(), 0);
  for (std::size_t b = 0; b < ht.n_buckets(); ++b) {
    EXPECT_LE(ht.fill(b), ht.bucket_capacity());
    std::size_t prev_row = 0;
    bool first = true;
    for (const auto& e : ht.bucket(b)) {
      EXPECT_EQ(block.key_column[e.row], e.key);
      EXPECT_EQ(ht.bucket_of(e.key), b);
      if (!first) EXPECT_LT(prev_row, e.row);  // row order inside a bucket
      prev_row = e.row;
      first = false;
      ++seen[e.row];
    }
  }
  for (auto n : seen) ASSERT_EQ(n, 1);
}

TEST(HashTable, RetryDoublesCapacityThenGivesUp) {
  const auto block = keys_block(std::vector<Key>(20, 4));
  const auto ht = build_hash_table_retrying(block, 2, 3, 3);  // 3 -> 6 -> 12 -> 24
  EXPECT_EQ(ht.bucket_capacity(), 24u);
  EXPECT_EQ(ht.size(), 20u);
  EXPECT_THROW(build_hash_table_retrying(block, 2, 1, 3), Error);  // stops at 8
}

TEST(PlanHashJoin, HandEvaluatedRanges) {
  // NB_S = 7 / 4 + 1 = 2
  const auto plan = plan_hash_join(7, 3, GridConfig{2, 1, 2, 1});
  ASSERT_EQ(plan.size(), 4u);
  EXPECT_EQ(plan[0].s_range, (RowRange{0, 2}));
  EXPECT_EQ(plan[1].s_range, (RowRange{2, 4}));
  EXPECT_EQ(plan[2].s_range, (RowRange{4, 6}));
  EXPECT_EQ(plan[3].s_range, (RowRange{6, 7}));
  EXPECT_EQ(plan[3].block_index[0], 1u);
  EXPECT_EQ(plan[3].thread_index[0], 1u);
  EXPECT_EQ(plan[0].slot_capacity, 6u);
  EXPECT_EQ(plan[3].slot_capacity, 3u);
}

TEST(PlanHashJoin, RequiresOneDimensionalGrid) {
  try {
    plan_hash_join(10, 10, GridConfig{2, 2, 1, 1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidGrid);
  }
}

TEST(HashJoinKernel, DuplicateInnerMatches) {
  const auto outer = keys_block({5}, "o");
  const auto inner = keys_block({5, 5}, "i");
  const auto ht = build_hash_table(inner, 4, 4);
  const auto r = hash_join_kernel(outer, ht, inner, GridConfig{}, WorkerPool(1));
  ASSERT_EQ(r.total, 2u);
  EXPECT_EQ(r.rows[0], (Row{Key{5}, std::string("o0"), Key{5}, std::string("i0")}));
  EXPECT_EQ(r.rows[1], (Row{Key{5}, std::string("o0"), Key{5}, std::string("i1")}));
}

TEST(HashJoinKernel, AgreesWithNestedLoop) {
  const auto outer_t = gen_synthetic(5000, 20000, 10, 1, 1);
  const auto inner_t = gen_synthetic(2000, 20000, 10, 1, 2);
  const auto outer = to_columnar(outer_t), inner = to_columnar(inner_t);
  const auto ht = build_hash_table_retrying(outer.n_rows ? inner : inner, 2048, 16);
  const auto hashed =
      hash_join_kernel(outer, ht, inner, GridConfig{8, 1, 32, 1}, WorkerPool(4));
  const auto plan = plan_nested_loop(outer.n_rows, inner.n_rows, GridConfig{2, 2, 4, 4});
  const auto looped =
      nested_loop_kernel(outer, inner, plan, {JoinOp::Eq}, WorkerPool(4));
  EXPECT_GT(hashed.total, 0u);
  EXPECT_EQ(sorted(hashed.rows), sorted(looped.rows));
}

TEST(CompactResults, ConcatenatesSlotPrefixes) {
  const std::vector<std::vector<std::string>> slots{
      {"r1", "junk"}, {"r2", "r3"}, {}};
  const std::vector<std::size_t> counts{1, 2, 0};
  const auto c = compact_results<std::string>(slots, counts);
  EXPECT_EQ(c.entries, (std::vector<std::string>{"r1", "r2", "r3"}));
  EXPECT_EQ(c.total, 3u);
  EXPECT_EQ(c.per_thread_counts[1], (std::pair<std::size_t, std::size_t>{1, 2}));
}

TEST(CompactResults, AllEmpty) {
  const std::vector<std::vector<int>> slots(4);
  const std::vector<std::size_t> counts(4, 0);
  const auto c = compact_results<int>(slots, counts);
  EXPECT_TRUE(c.entries.empty());
  EXPECT_EQ(c.total, 0u);
}

TEST(CompactResults, IndependentOfWorkerCount) {
  std::mt19937_64 rng(3);
  const auto s = to_columnar(testing::random_table(rng, 300, 0, 50, 1));
  const auto t = to_columnar(testing::random_table(rng, 200, 0, 50, 1));
  const auto plan = plan_nested_loop(300, 200, GridConfig{4, 4, 4, 4});
  const auto one = nested_loop_kernel(s, t, plan, {JoinOp::Le}, WorkerPool(1));
  const auto many = nested_loop_kernel(s, t, plan, {JoinOp::Le}, WorkerPool(8));
  EXPECT_EQ(one.rows, many.rows);
  EXPECT_EQ(one.per_thread_counts, many.per_thread_counts);
}

TEST(EstimateResultSize, WorkedTwoReducerExample) {
  const std::vector<std::size_t> s{25, 25}, t{25, 25};
  const auto r = estimate_result_size(s, t, 100, 100);
  EXPECT_DOUBLE_EQ(r.beta_s, 0.5);
  EXPECT_DOUBLE_EQ(r.gamma_t, 0.5);
  EXPECT_EQ(r.omega, (std::vector<double>{0.5, 0.5}));
  EXPECT_EQ(r.lambda, (std::vector<double>{0.5, 0.5}));
  EXPECT_EQ(r.r_size, 1250u);
}

TEST(EstimateResultSize, SingleReducerIsCartesianBound) {
  const std::vector<std::size_t> s{70}, t{30};
  EXPECT_EQ(estimate_result_size(s, t, 70, 30).r_size, 2100u);
}

TEST(EstimateResultSize, DegenerateInputsReportZero) {
  const std::vector<std::size_t> z{0, 0}, some{3, 4};
  auto r = estimate_result_size(z, z, 0, 10);
  EXPECT_TRUE(r.degenerate);
  EXPECT_EQ(r.r_size, 0u);
  r = estimate_result_size(z, some, 5, 10);
  EXPECT_TRUE(r.degenerate);
  EXPECT_EQ(r.r_size, 0u);
}

TEST(EstimateResultSize, BoundsActualJoinOnRandomSplits) {
  std::mt19937_64 rng(200);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t ns = 1 + rng() % 120, nt = 1 + rng() % 120;
    const Key domain = 1 + static_cast<Key>(rng() % 80);
    std::vector<Key> sk(ns), tk(nt);
    for (auto& k : sk) k = static_cast<Key>(rng() % domain);
    for (auto& k : tk) k = static_cast<Key>(rng() % domain);
    // the pre-filter's view: shared keys only, routed to 8 reducers
    std::set<Key> s_set(sk.begin(), sk.end()), shared;
    for (Key k : tk)
      if (s_set.count(k)) shared.insert(k);
    const ShufflePlan plan{8, 1 + static_cast<Key>(rng() % 5)};
    std::vector<std::size_t> sc(8, 0), tc(8, 0);
    for (Key k : sk)
      if (shared.count(k)) ++sc[route_group(k, plan).reducer];
    for (Key k : tk)
      if (shared.count(k)) ++tc[route_group(k, plan).reducer];
    std::size_t actual = 0, cartesian = 0;
    for (Key a : sk)
      for (Key b : tk) actual += a == b;
    for (int i = 0; i < 8; ++i) cartesian += sc[i] * tc[i];
    const auto r = estimate_result_size(sc, tc, ns, nt);
    ASSERT_GE(r.r_size, actual) << "trial " << trial;
    ASSERT_EQ(r.r_size, cartesian) << "trial " << trial;
    if (!r.degenerate) {
      double so = 0, sl = 0;
      for (double w : r.omega) so += w;
      for (double l : r.lambda) sl += l;
      EXPECT_NEAR(so, 1.0, 1e-9);
      EXPECT_NEAR(sl, 1.0, 1e-9);
    }
  }
}

TEST(ThreadHierarchy, AdmissionChecks) {
  GridConfig grid{4, 1, 64, 1, 30000};
  auto r = check_thread_hierarchy(100, grid);
  EXPECT_EQ(r.product, 25600u);
  EXPECT_TRUE(r.admitted);

  grid.device_total_threads = 20000;
  r = check_thread_hierarchy(100, grid);
  EXPECT_FALSE(r.admitted);
  EXPECT_DOUBLE_EQ(r.factor, 1.28);

  r = check_thread_hierarchy(1, GridConfig{1, 1, 1, 1, 1});
  EXPECT_EQ(r.product, 1u);
  EXPECT_FALSE(r.admitted);
}

}  // namespace
}  // namespace gridjoin
