#include "gridjoin/vgpu.hpp"

#include <cmath>
#include <numeric>

namespace gridjoin {

std::string_view to_string(JoinOp op) {
  switch (op) {
    case JoinOp::Eq: return "eq";
    case JoinOp::Gt: return "gt";
    case JoinOp::Ge: return "ge";
    case JoinOp::Lt: return "lt";
    case JoinOp::Le: return "le";
    case JoinOp::Ne: return "ne";
  }
  return "?";
}

JoinOp parse_join_op(std::string_view text) {
  for (auto op : {JoinOp::Eq, JoinOp::Gt, JoinOp::Ge, JoinOp::Lt, JoinOp::Le,
                  JoinOp::Ne})
    if (to_string(op) == text) return op;
  throw Error(ErrorCode::InvalidConfig,
              "unknown join condition '" + std::string(text) + "'");
}

void GridConfig::validate() const {
  if (blocks_x < 1 || blocks_y < 1 || threads_x < 1 || threads_y < 1)
    throw Error(ErrorCode::InvalidGrid, "grid dimensions must be >= 1");
  if (device_total_threads < 1)
    throw Error(ErrorCode::InvalidGrid, "device must have >= 1 thread");
}

namespace {

RowRange clamped(std::size_t start, std::size_t length, std::size_t n) {
  const std::size_t begin = std::min(start, n);
  return {begin, std::min(start + length, n)};
}

}  // namespace

std::vector<ThreadAssignment> plan_nested_loop(std::size_t nb_s_total,
                                               std::size_t nb_t_total,
                                               const GridConfig& grid) {
  grid.validate();
  const std::size_t m = grid.blocks_x, n = grid.blocks_y;
  const std::size_t x = grid.threads_x, y = grid.threads_y;
  // The +1 overshoots when m*x divides |S|; clamping absorbs it.
  const std::size_t nb_s = nb_s_total / (m * x) + 1;
  const std::size_t nb_t = nb_t_total / (n * y) + 1;

  std::vector<ThreadAssignment> plan;
  plan.reserve(grid.total_threads());
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t c = 0; c < x; ++c)
        for (std::size_t d = 0; d < y; ++d) {
          ThreadAssignment t;
          t.block_index = {a, b};
          t.thread_index = {c, d};
          t.s_range = clamped((a * x + c) * nb_s, nb_s, nb_s_total);
          t.t_range = clamped((b * y + d) * nb_t, nb_t, nb_t_total);
          t.slot_capacity = static_cast<std::uint64_t>(t.s_range.size()) *
                            t.t_range.size();
          plan.push_back(t);
        }
  return plan;
}

std::vector<ThreadAssignment> plan_hash_join(std::size_t n_outer,
                                             std::size_t n_inner,
                                             const GridConfig& grid) {
  grid.validate();
  if (!grid.is_1d())
    throw Error(ErrorCode::InvalidGrid, "hash join needs a one-dimensional grid");
  const std::size_t n_blocks = grid.blocks_x, n_threads = grid.threads_x;
  const std::size_t nb_s = n_outer / (n_blocks * n_threads) + 1;

  std::vector<ThreadAssignment> plan;
  plan.reserve(n_blocks * n_threads);
  for (std::size_t p = 0; p < n_blocks; ++p)
    for (std::size_t q = 0; q < n_threads; ++q) {
      ThreadAssignment t;
      t.block_index = {p, 0};
      t.thread_index = {q, 0};
      t.s_range = clamped((p * n_threads + q) * nb_s, nb_s, n_outer);
      t.t_range = {0, n_inner};
      plan.push_back(t);
    }
  // Tail rows go to the last thread. With the +1 in NB the nominal ranges
  // already reach n_outer, so this never extends anything.
  assert(plan.back().s_range.end == n_outer);
  plan.back().s_range.end = n_outer;
  for (auto& t : plan)
    t.slot_capacity = static_cast<std::uint64_t>(t.s_range.size()) * n_inner;
  return plan;
}

void KernelStats::merge(const KernelStats& other) {
  launches += other.launches;
  pairs_tested += other.pairs_tested;
  peak_slot_bytes = std::max(peak_slot_bytes, other.peak_slot_bytes);
  bytes_staged += other.bytes_staged;
}

void JoinResult::append(JoinResult&& other) {
  const std::size_t offset = per_thread_counts.size();
  rows.reserve(rows.size() + other.rows.size());
  for (auto& r : other.rows) rows.push_back(std::move(r));
  for (auto [id, count] : other.per_thread_counts)
    per_thread_counts.emplace_back(id + offset, count);
  total += other.total;
  stats.merge(other.stats);
}

JoinResult materialize(const Compacted<RowPair>& pairs,
                       const ColumnarBlock& first, const ColumnarBlock& second,
                       bool swap) {
  JoinResult result;
  result.rows.reserve(pairs.entries.size());
  const std::size_t width = first.schema.size() + second.schema.size();
  for (const auto& p : pairs.entries) {
    Row row;
    row.reserve(width);
    if (swap) {
      second.append_row(p.second, row);
      first.append_row(p.first, row);
    } else {
      first.append_row(p.first, row);
      second.append_row(p.second, row);
    }
    result.rows.push_back(std::move(row));
  }
  result.per_thread_counts = pairs.per_thread_counts;
  result.total = pairs.total;
  return result;
}

JoinResult nested_loop_kernel(const ColumnarBlock& s, const ColumnarBlock& t,
                              std::span<const ThreadAssignment> plan,
                              JoinCondition predicate,
                              const WorkerPool& pool) {
  KernelStats stats;
  auto pairs = nested_loop_pairs(s, t, plan, predicate, pool, &stats);
  auto result = materialize(pairs, s, t);
  result.stats = stats;
  return result;
}

std::size_t HashTable::size() const noexcept {
  return std::accumulate(fill_.begin(), fill_.end(), std::size_t{0});
}

HashTable build_hash_table(const ColumnarBlock& inner, std::size_t n_buckets,
                           std::size_t bucket_capacity) {
  if (n_buckets < 1 || bucket_capacity < 1)
    throw Error(ErrorCode::InvalidConfig,
                "n_buckets and bucket_capacity must be >= 1");
  HashTable ht;
  ht.capacity_ = bucket_capacity;
  ht.fill_.assign(n_buckets, 0);
  ht.entries_.resize(n_buckets * bucket_capacity);
  for (std::size_t row = 0; row < inner.n_rows; ++row) {
    const Key key = inner.key_column[row];
    const std::size_t b = ht.bucket_of(key);
    auto& fill = ht.fill_[b];
    if (fill == bucket_capacity)
      throw Error(ErrorCode::BucketOverflow,
                  "bucket " + std::to_string(b) + " is full at capacity " +
                      std::to_string(bucket_capacity),
                  static_cast<std::int64_t>(b));
    ht.entries_[b * bucket_capacity + fill] = {key, row};
    ++fill;
  }
  return ht;
}

HashTable build_hash_table_retrying(const ColumnarBlock& inner,
                                    std::size_t n_buckets,
                                    std::size_t bucket_capacity,
                                    int max_retries) {
  for (int attempt = 0;; ++attempt) {
    try {
      return build_hash_table(inner, n_buckets, bucket_capacity);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::BucketOverflow || attempt >= max_retries)
        throw;
      bucket_capacity *= 2;
    }
  }
}

Compacted<RowPair> hash_join_pairs(const ColumnarBlock& outer,
                                   const HashTable& inner_ht,
                                   const ColumnarBlock& inner,
                                   const GridConfig& grid,
                                   const WorkerPool& pool,
                                   KernelStats* stats) {
  const auto plan = plan_hash_join(outer.n_rows, inner.n_rows, grid);
  std::vector<std::vector<RowPair>> slots(plan.size());
  std::vector<std::size_t> counts(plan.size(), 0);
  std::vector<std::uint64_t> probes(plan.size(), 0);

  pool.parallel_for(plan.size(), [&](std::size_t id) {
    const auto& a = plan[id];
    auto& slot = slots[id];
    std::size_t count = 0;
    std::uint64_t probed = 0;
    for (std::size_t i = a.s_range.begin; i < a.s_range.end; ++i) {
      const Key key = outer.key_column[i];
      for (const auto& e : inner_ht.bucket(inner_ht.bucket_of(key))) {
        ++probed;
        if (e.key == key) {
          slot.push_back({i, e.row});
          ++count;
        }
      }
    }
    if (count > a.slot_capacity)
      throw Error(ErrorCode::SlotOverflow, "thread " + std::to_string(id) +
                                               " exceeded its slot buffer");
    counts[id] = count;
    probes[id] = probed;
  });

  if (stats) {
    std::uint64_t reserved = 0;
    for (const auto& a : plan) reserved += a.slot_capacity;
    stats->launches += 1;
    stats->pairs_tested +=
        std::accumulate(probes.begin(), probes.end(), std::uint64_t{0});
    stats->peak_slot_bytes =
        std::max(stats->peak_slot_bytes, reserved * kSlotEntryBytes);
    stats->bytes_staged += outer.byte_size() + inner.byte_size();
  }
  return compact_results<RowPair>(slots, counts);
}

JoinResult hash_join_kernel(const ColumnarBlock& outer,
                            const HashTable& inner_ht,
                            const ColumnarBlock& inner, const GridConfig& grid,
                            const WorkerPool& pool) {
  KernelStats stats;
  auto pairs = hash_join_pairs(outer, inner_ht, inner, grid, pool, &stats);
  auto result = materialize(pairs, outer, inner);
  result.stats = stats;
  return result;
}

EstimationReport estimate_result_size(std::span<const std::size_t> s_counts,
                                      std::span<const std::size_t> t_counts,
                                      std::size_t s_total,
                                      std::size_t t_total) {
  if (s_counts.size() != t_counts.size())
    throw Error(ErrorCode::InvalidConfig,
                "per-reducer count lists differ in length");
  const std::size_t k = s_counts.size();
  EstimationReport report;
  report.omega.assign(k, 0.0);
  report.lambda.assign(k, 0.0);

  const double s_filtered =
      std::accumulate(s_counts.begin(), s_counts.end(), 0.0);
  const double t_filtered =
      std::accumulate(t_counts.begin(), t_counts.end(), 0.0);
  if (s_total == 0 || t_total == 0 || s_filtered == 0.0 || t_filtered == 0.0) {
    report.degenerate = true;
    return report;
  }

  report.beta_s = s_filtered / static_cast<double>(s_total);
  report.gamma_t = t_filtered / static_cast<double>(t_total);
  double overlap = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    report.omega[i] = static_cast<double>(s_counts[i]) / s_filtered;
    report.lambda[i] = static_cast<double>(t_counts[i]) / t_filtered;
    overlap += report.omega[i] * report.lambda[i];
  }
  const double r = report.gamma_t * report.beta_s *
                   static_cast<double>(s_total) *
                   static_cast<double>(t_total) * overlap;
  report.r_size = static_cast<std::uint64_t>(std::llround(r));
  return report;
}

HierarchyReport check_thread_hierarchy(std::size_t n_reducers,
                                       const GridConfig& grid) {
  grid.validate();
  HierarchyReport report;
  report.product = static_cast<std::uint64_t>(n_reducers) * grid.n_blocks() *
                   grid.threads_per_block();
  report.device_total_threads = grid.device_total_threads;
  report.admitted = report.product < grid.device_total_threads;
  report.factor = static_cast<double>(report.product) /
                  static_cast<double>(grid.device_total_threads);
  return report;
}

}  // namespace gridjoin
