#pragma once

#include <array>
#include <cassert>
#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "gridjoin/common.hpp"
#include "gridjoin/join_condition.hpp"
#include "gridjoin/mapreduce.hpp"
#include "gridjoin/relation.hpp"

namespace gridjoin {

/// Virtual device grid: blocks_x * blocks_y thread blocks, each holding
/// threads_x * threads_y threads, on a device with `device_total_threads`.
struct GridConfig {
  std::size_t blocks_x = 1;
  std::size_t blocks_y = 1;
  std::size_t threads_x = 1;
  std::size_t threads_y = 1;
  std::uint64_t device_total_threads = 30720;

  void validate() const;
  bool is_1d() const noexcept { return blocks_y == 1 && threads_y == 1; }
  std::size_t n_blocks() const noexcept { return blocks_x * blocks_y; }
  std::size_t threads_per_block() const noexcept {
    return threads_x * threads_y;
  }
  std::size_t total_threads() const noexcept {
    return n_blocks() * threads_per_block();
  }
  /// Same thread counts laid out one-dimensionally.
  GridConfig flattened() const {
    return {n_blocks(), 1, threads_per_block(), 1, device_total_threads};
  }

  friend bool operator==(const GridConfig&, const GridConfig&) = default;
};

struct RowRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const noexcept { return end - begin; }
  bool empty() const noexcept { return begin == end; }

  friend bool operator==(const RowRange&, const RowRange&) = default;
};

/// One logical thread: its grid coordinates, the rows it reads and the
/// number of result slots reserved for it.
struct ThreadAssignment {
  std::array<std::size_t, 2> block_index{};   // (a, b) or (p, 0)
  std::array<std::size_t, 2> thread_index{};  // (c, d) or (q, 0)
  RowRange s_range;
  RowRange t_range;
  std::uint64_t slot_capacity = 0;
};

/// Nested-loop plan: per-thread chunk NB = n / (blocks * threads) + 1 on each
/// axis, start (block * threads + thread) * NB, clamped to the table.
/// Assignments are ordered by thread id, row-major over (a, b, c, d).
std::vector<ThreadAssignment> plan_nested_loop(std::size_t nb_s_total,
                                               std::size_t nb_t_total,
                                               const GridConfig& grid);

/// One-dimensional hash-join plan over the outer table. Each thread reads
/// NB = n / (n_blocks * n_threads) + 1 outer rows starting at
/// (p * n_threads + q) * NB; the last thread also takes any tail rows.
/// t_range of every assignment covers the whole inner table.
std::vector<ThreadAssignment> plan_hash_join(std::size_t n_outer,
                                             std::size_t n_inner,
                                             const GridConfig& grid);

/// Result slot entry: matching row of the first and second kernel input.
struct RowPair {
  std::size_t first = 0;
  std::size_t second = 0;

  friend bool operator==(const RowPair&, const RowPair&) = default;
};

inline constexpr std::uint64_t kSlotEntryBytes = sizeof(RowPair);

template <class T>
struct Compacted {
  std::vector<T> entries;
  std::vector<std::pair<std::size_t, std::size_t>> per_thread_counts;
  std::size_t total = 0;
};

/// Concatenates slot prefixes in ascending thread id.
template <class T>
Compacted<T> compact_results(std::span<const std::vector<T>> slots,
                             std::span<const std::size_t> counts) {
  assert(slots.size() == counts.size());
  Compacted<T> out;
  std::size_t total = 0;
  for (auto c : counts) total += c;
  out.entries.reserve(total);
  out.per_thread_counts.reserve(slots.size());
  for (std::size_t i = 0; i < slots.size(); ++i) {
    assert(counts[i] <= slots[i].size());
    out.entries.insert(out.entries.end(), slots[i].begin(),
                       slots[i].begin() + static_cast<std::ptrdiff_t>(counts[i]));
    out.per_thread_counts.emplace_back(i, counts[i]);
  }
  out.total = total;
  return out;
}

struct KernelStats {
  std::uint64_t launches = 0;
  std::uint64_t pairs_tested = 0;
  /// Worst-case slot reservation of the largest launch.
  std::uint64_t peak_slot_bytes = 0;
  std::uint64_t bytes_staged = 0;

  void merge(const KernelStats& other);
};

struct JoinResult {
  std::vector<Row> rows;
  std::vector<std::pair<std::size_t, std::size_t>> per_thread_counts;
  std::size_t total = 0;
  KernelStats stats;

  /// Appends `other`'s rows; thread ids of `other` are offset past ours.
  void append(JoinResult&& other);
};

/// Builds result rows as first-block row ++ second-block row, or the reverse
/// when `swap` is set.
JoinResult materialize(const Compacted<RowPair>& pairs,
                       const ColumnarBlock& first, const ColumnarBlock& second,
                       bool swap = false);

/// Runs the nested-loop kernel and returns compacted (s row, t row) pairs.
/// `pred(s_key, t_key)` decides a match.
template <class Pred>
Compacted<RowPair> nested_loop_pairs(const ColumnarBlock& s,
                                     const ColumnarBlock& t,
                                     std::span<const ThreadAssignment> plan,
                                     Pred&& pred, const WorkerPool& pool,
                                     KernelStats* stats = nullptr) {
  std::vector<std::vector<RowPair>> slots(plan.size());
  std::vector<std::size_t> counts(plan.size(), 0);
  std::uint64_t reserved = 0;
  std::uint64_t tested = 0;
  for (const auto& a : plan) {
    reserved += a.slot_capacity;
    tested += a.s_range.size() * a.t_range.size();
  }

  pool.parallel_for(plan.size(), [&](std::size_t id) {
    const auto& a = plan[id];
    auto& slot = slots[id];
    std::size_t count = 0;
    for (std::size_t i = a.s_range.begin; i < a.s_range.end; ++i) {
      const Key sk = s.key_column[i];
      for (std::size_t j = a.t_range.begin; j < a.t_range.end; ++j) {
        if (pred(sk, t.key_column[j])) {
          slot.push_back({i, j});
          ++count;
        }
      }
    }
    // Cartesian sizing makes overflow impossible.
    assert(count <= a.slot_capacity);
    counts[id] = count;
  });

  if (stats) {
    stats->launches += 1;
    stats->pairs_tested += tested;
    stats->peak_slot_bytes =
        std::max(stats->peak_slot_bytes, reserved * kSlotEntryBytes);
    stats->bytes_staged += s.byte_size() + t.byte_size();
  }
  return compact_results<RowPair>(slots, counts);
}

JoinResult nested_loop_kernel(const ColumnarBlock& s, const ColumnarBlock& t,
                              std::span<const ThreadAssignment> plan,
                              JoinCondition predicate, const WorkerPool& pool);

/// Fixed-size bucketed hash table over the inner block. Bucket b holds up to
/// `bucket_capacity` (key, row) entries in row order.
class HashTable {
 public:
  struct Entry {
    Key key;
    std::size_t row;
  };

  std::size_t n_buckets() const noexcept { return fill_.size(); }
  std::size_t bucket_capacity() const noexcept { return capacity_; }
  std::size_t fill(std::size_t bucket) const { return fill_[bucket]; }
  std::size_t size() const noexcept;
  std::size_t bucket_of(Key key) const noexcept {
    return static_cast<std::size_t>(
        static_cast<std::uint64_t>(nonneg_hash(key, kBucketHashSeed)) %
        fill_.size());
  }
  std::span<const Entry> bucket(std::size_t b) const {
    return {entries_.data() + b * capacity_, fill_[b]};
  }

 private:
  friend HashTable build_hash_table(const ColumnarBlock&, std::size_t,
                                    std::size_t);
  std::size_t capacity_ = 0;
  std::vector<Entry> entries_;
  std::vector<std::size_t> fill_;
};

/// Throws BucketOverflow (detail = bucket index) when a bucket is full.
HashTable build_hash_table(const ColumnarBlock& inner, std::size_t n_buckets,
                           std::size_t bucket_capacity);

/// Rebuilds with doubled capacity on BucketOverflow, at most `max_retries`
/// times, then rethrows.
HashTable build_hash_table_retrying(const ColumnarBlock& inner,
                                    std::size_t n_buckets,
                                    std::size_t bucket_capacity,
                                    int max_retries = 3);

/// Probes the table with every outer row; returns (outer row, inner row)
/// pairs. `grid` must be one-dimensional.
Compacted<RowPair> hash_join_pairs(const ColumnarBlock& outer,
                                   const HashTable& inner_ht,
                                   const ColumnarBlock& inner,
                                   const GridConfig& grid,
                                   const WorkerPool& pool,
                                   KernelStats* stats = nullptr);

JoinResult hash_join_kernel(const ColumnarBlock& outer,
                            const HashTable& inner_ht,
                            const ColumnarBlock& inner, const GridConfig& grid,
                            const WorkerPool& pool);

/// Participation fractions and the result bound
///   r_size = gamma * beta * |S| * |T| * sum(omega_i * lambda_i).
struct EstimationReport {
  double beta_s = 0.0;
  double gamma_t = 0.0;
  std::vector<double> omega;
  std::vector<double> lambda;
  /// Eq. value rounded to the nearest integer; equals sum(s_i * t_i).
  std::uint64_t r_size = 0;
  bool degenerate = false;
};

EstimationReport estimate_result_size(std::span<const std::size_t> s_counts,
                                      std::span<const std::size_t> t_counts,
                                      std::size_t s_total,
                                      std::size_t t_total);

struct HierarchyReport {
  std::uint64_t product = 0;
  std::uint64_t device_total_threads = 0;
  bool admitted = false;
  /// product / device_total_threads
  double factor = 0.0;
};

/// n_reducers * n_blocks * n_threads < N.
HierarchyReport check_thread_hierarchy(std::size_t n_reducers,
                                       const GridConfig& grid);

}  // namespace gridjoin
