#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gridjoin/mapreduce.hpp"
#include "gridjoin/relation.hpp"
#include "gridjoin/vgpu.hpp"

namespace gridjoin {

/// Join keys present in both tables, ascending.
struct KeyIntersection {
  std::vector<Key> keys;

  bool contains(Key key) const;
  std::size_t size() const noexcept { return keys.size(); }
};

/// Everything one reducer hands to the device.
struct ReducerPartition {
  ColumnarBlock s_block;
  ColumnarBlock t_block;
  std::size_t nb_s = 0;
  std::size_t nb_t = 0;
  std::size_t reducer_index = 0;
  std::size_t n_groups = 0;
};

/// Round one: map emits one (key, tag) per distinct key per table, reduce
/// keeps keys whose group holds both tags.
KeyIntersection round1_key_intersection(const Table& s, const Table& t,
                                        const ShufflePlan& plan,
                                        const WorkerPool& pool);

/// Round two: drops tuples whose key is not in `ix`, projects, tags, routes
/// by floor(key / alpha), and packs each non-empty reducer's tuples into
/// two columnar blocks. Partitions are ordered by reducer index. An empty
/// keep list keeps every column of that side.
std::vector<ReducerPartition> round2_filter_and_route(
    const Table& s, const Table& t, const KeyIntersection& ix,
    std::span<const std::string> keep_s, std::span<const std::string> keep_t,
    const ShufflePlan& plan);

enum class EquiAlgo { NestedLoop, Hash };

struct EquiJoinOptions {
  EquiAlgo algo = EquiAlgo::Hash;
  ShufflePlan plan;
  GridConfig grid;
  /// 0 picks bit_ceil(inner rows).
  std::size_t hash_buckets = 0;
  std::size_t bucket_capacity = 16;
  int bucket_retries = 3;
  /// Skip round one and ship every tuple to the reducers.
  bool prefilter = true;
};

struct EquiJoinStats {
  std::uint64_t tuples_in = 0;
  std::uint64_t tuples_after_filter = 0;
  std::size_t intersection_size = 0;
  std::size_t n_groups = 0;
  std::size_t n_partitions = 0;
  std::vector<std::size_t> s_counts;  // per reducer, all k reducers
  std::vector<std::size_t> t_counts;
  EstimationReport estimate;
  KernelStats kernel;
  double round1_ms = 0.0;
  double round2_map_ms = 0.0;
  double shuffle_ms = 0.0;
  double reduce_join_ms = 0.0;
};

struct EquiJoinOutcome {
  KeyIntersection intersection;
  JoinResult result;
  EquiJoinStats stats;
};

/// Equi join through both rounds. Each result row is the projected S row
/// followed by the projected T row; rows come out in reducer order, then
/// kernel thread order.
EquiJoinOutcome filtered_equi_join(const Table& s, const Table& t,
                                   std::span<const std::string> keep_s,
                                   std::span<const std::string> keep_t,
                                   const EquiJoinOptions& options,
                                   const WorkerPool& pool);

}  // namespace gridjoin
