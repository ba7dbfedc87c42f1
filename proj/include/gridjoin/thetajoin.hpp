#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "gridjoin/join_condition.hpp"
#include "gridjoin/mapreduce.hpp"
#include "gridjoin/relation.hpp"
#include "gridjoin/vgpu.hpp"

namespace gridjoin {

/// k x k matrix over (S key, T key) with one set of cut points for both axes.
/// Bucket b covers [boundaries[b-1], boundaries[b]); bucket 0 is open below
/// and bucket k-1 open above.
struct RegionMatrix {
  std::size_t requested_k = 1;
  std::size_t k = 1;
  std::vector<Key> boundaries;
  /// Set when every key is equal and the matrix collapsed to one bucket.
  bool degenerate = false;

  std::size_t bucket_of(Key key) const;
};

struct RegionId {
  std::size_t x = 0;  // S bucket
  std::size_t y = 0;  // T bucket

  friend auto operator<=>(const RegionId&, const RegionId&) = default;
};

enum class RegionClass { Green, Red, White };

std::string_view to_string(RegionClass c);

/// Cut points are the i/k quantiles (i = 1..k-1) of the merged key multiset,
/// taken at 0-based sorted position ceil(N * i / k). Repeated cut points are
/// merged, lowering the effective k.
RegionMatrix compute_bucket_boundaries(std::span<const Key> s_keys,
                                       std::span<const Key> t_keys,
                                       std::size_t k);
RegionMatrix compute_bucket_boundaries(const Table& s, const Table& t,
                                       std::size_t k);

/// Green: every pair in the region satisfies `op`; Red: pairs must be
/// tested; White: no pair can satisfy it. EQ is rejected.
RegionClass classify_region(RegionId id, JoinCondition op);

/// Regions a key must be replicated to: its full matrix row (S) or column
/// (T), minus White cells.
std::vector<RegionId> theta_regions(Key key, Tag tag,
                                    const RegionMatrix& matrix,
                                    JoinCondition op);

std::vector<std::pair<RegionId, TaggedTuple>> theta_map(
    const TaggedTuple& tuple, const RegionMatrix& matrix, JoinCondition op);

/// Cartesian product in (s index, t index) order.
JoinResult cross_join(std::span<const Row> s_part, std::span<const Row> t_part);

/// Joins the tuples routed to one region. Red regions go through the
/// nested-loop kernel with `op`; Green regions are cross joined untested.
JoinResult theta_reduce(RegionId id, std::span<const TaggedTuple> tuples,
                        JoinCondition op, const GridConfig& grid,
                        const Schema& s_schema, const Schema& t_schema,
                        const WorkerPool& pool);

struct ThetaStats {
  std::size_t regions_green = 0;
  std::size_t regions_red = 0;
  std::size_t regions_white = 0;
  std::uint64_t tuples_in = 0;
  std::uint64_t tuples_replicated = 0;
  std::uint64_t pairs_tested = 0;
  std::uint64_t pairs_emitted_untested = 0;
  /// Sum over received regions of |S side| * |T side|.
  std::uint64_t r_size_bound = 0;
  std::size_t requested_k = 0;
  std::size_t effective_k = 0;
  bool degenerate_domain = false;
  std::size_t n_groups = 0;
  KernelStats kernel;
  double map_ms = 0.0;
  double shuffle_ms = 0.0;
  double reduce_ms = 0.0;
};

struct ThetaJoinOutcome {
  JoinResult result;
  ThetaStats stats;
};

/// Region-matrix theta join over already projected tables. Output is ordered
/// by (region x, region y, emission order).
ThetaJoinOutcome theta_join(const Table& s, const Table& t, JoinCondition op,
                            std::size_t quantiles_k, std::size_t n_reducers,
                            const GridConfig& grid, const WorkerPool& pool);

}  // namespace gridjoin
