#include "gridjoin/prefilter.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <unordered_set>

#include "gridjoin/join_condition.hpp"

namespace gridjoin {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since)
      .count();
}

struct SourceRow {
  const Table* table;
  std::size_t row;
  Tag tag;
};

struct Projection {
  Schema schema;
  std::vector<std::size_t> source;
};

Projection make_projection(const Table& table,
                           std::span<const std::string> keep) {
  // Validates `keep` exactly like project() and yields the column mapping.
  // An empty list keeps every column.
  auto schema = keep.empty() ? table.schema()
                             : project(Table(table.schema(), {}), keep).schema();
  std::vector<std::size_t> source;
  for (const auto& col : schema.columns())
    source.push_back(*table.schema().index_of(col.name));
  return {std::move(schema), std::move(source)};
}

struct RoutedPartitions {
  std::vector<ReducerPartition> partitions;
  std::size_t n_groups = 0;
  double map_ms = 0.0;
  double shuffle_ms = 0.0;
};

RoutedPartitions route_partitions(const Table& s, const Table& t,
                                  const KeyIntersection* ix,
                                  const Projection& proj_s,
                                  const Projection& proj_t,
                                  const ShufflePlan& plan) {
  plan.validate();
  RoutedPartitions out;
  auto t0 = Clock::now();

  // Setup(): one membership table shared by every mapper.
  std::unordered_set<Key> members;
  if (ix) members.insert(ix->keys.begin(), ix->keys.end());

  std::vector<SourceRow> inputs;
  inputs.reserve(s.cardinality() + t.cardinality());
  for (std::size_t i = 0; i < s.cardinality(); ++i)
    inputs.push_back({&s, i, Tag::S});
  for (std::size_t i = 0; i < t.cardinality(); ++i)
    inputs.push_back({&t, i, Tag::T});
  out.map_ms = elapsed_ms(t0);

  t0 = Clock::now();
  auto shuffled = map_and_shuffle<SourceRow, TaggedTuple>(
      inputs,
      [&](const SourceRow& in, Emitter<TaggedTuple>& emit) {
        const Key key = in.table->key(in.row);
        if (ix && !members.contains(key)) return;
        const auto& proj = in.tag == Tag::S ? proj_s : proj_t;
        const auto& src = in.table->rows()[in.row];
        Row projected;
        projected.reserve(proj.source.size());
        for (auto c : proj.source) projected.push_back(src[c]);
        emit.emit(floor_div(key, plan.alpha),
                  TaggedTuple{key, in.tag, std::move(projected)}, in.tag);
      },
      plan.n_reducers);
  out.n_groups = shuffled.n_groups();

  for (std::size_t r = 0; r < shuffled.reducers.size(); ++r) {
    auto& groups = shuffled.reducers[r];
    if (groups.empty()) continue;
    std::vector<Row> s_rows, t_rows;
    for (auto& g : groups)
      for (auto& tuple : g.values)
        (tuple.tag == Tag::S ? s_rows : t_rows)
            .push_back(std::move(tuple.payload));
    ReducerPartition part{to_columnar(proj_s.schema, s_rows),
                          to_columnar(proj_t.schema, t_rows),
                          s_rows.size(),
                          t_rows.size(),
                          r,
                          groups.size()};
    out.partitions.push_back(std::move(part));
  }
  out.shuffle_ms = elapsed_ms(t0);
  return out;
}

JoinResult join_partition(const ReducerPartition& part,
                          const EquiJoinOptions& options,
                          const WorkerPool& pool) {
  KernelStats stats;
  JoinResult result;
  if (part.nb_s == 0 || part.nb_t == 0) return result;

  if (options.algo == EquiAlgo::NestedLoop) {
    const auto plan = plan_nested_loop(part.nb_s, part.nb_t, options.grid);
    auto pairs = nested_loop_pairs(part.s_block, part.t_block, plan,
                                   JoinCondition{JoinOp::Eq}, pool, &stats);
    result = materialize(pairs, part.s_block, part.t_block);
  } else {
    // Probe with the larger side, build on the smaller one.
    const bool s_outer = part.nb_s >= part.nb_t;
    const auto& outer = s_outer ? part.s_block : part.t_block;
    const auto& inner = s_outer ? part.t_block : part.s_block;
    const std::size_t buckets =
        options.hash_buckets ? options.hash_buckets
                             : std::bit_ceil(std::max<std::size_t>(1, inner.n_rows));
    const auto ht = build_hash_table_retrying(
        inner, buckets, options.bucket_capacity, options.bucket_retries);
    auto pairs = hash_join_pairs(outer, ht, inner, options.grid.flattened(),
                                 pool, &stats);
    result = materialize(pairs, outer, inner, /*swap=*/!s_outer);
  }
  result.stats = stats;
  return result;
}

}  // namespace

bool KeyIntersection::contains(Key key) const {
  return std::binary_search(keys.begin(), keys.end(), key);
}

KeyIntersection round1_key_intersection(const Table& s, const Table& t,
                                        const ShufflePlan& plan,
                                        const WorkerPool& pool) {
  struct KeyTag {
    Key key;
    Tag tag;
  };
  // Map-side dedup: one (key, tag) per distinct key per table.
  auto distinct = [](const Table& table) {
    std::vector<Key> keys;
    keys.reserve(table.cardinality());
    for (std::size_t i = 0; i < table.cardinality(); ++i)
      keys.push_back(table.key(i));
    std::sort(keys.begin(), keys.end());
    keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
    return keys;
  };
  std::vector<KeyTag> inputs;
  for (Key k : distinct(s)) inputs.push_back({k, Tag::S});
  for (Key k : distinct(t)) inputs.push_back({k, Tag::T});

  auto keys = run_map_reduce<KeyTag, Tag>(
      std::span<const KeyTag>(inputs),
      [](const KeyTag& in, Emitter<Tag>& out) {
        out.emit(in.key, in.tag, in.tag);
      },
      [](Key key, std::span<const Tag> tags) {
        std::vector<Key> out;
        const bool has_s = std::find(tags.begin(), tags.end(), Tag::S) != tags.end();
        const bool has_t = std::find(tags.begin(), tags.end(), Tag::T) != tags.end();
        if (has_s && has_t) out.push_back(key);
        return out;
      },
      ShufflePlan{plan.n_reducers, 1}, pool);
  std::sort(keys.begin(), keys.end());
  return {std::move(keys)};
}

std::vector<ReducerPartition> round2_filter_and_route(
    const Table& s, const Table& t, const KeyIntersection& ix,
    std::span<const std::string> keep_s, std::span<const std::string> keep_t,
    const ShufflePlan& plan) {
  const auto proj_s = make_projection(s, keep_s);
  const auto proj_t = make_projection(t, keep_t);
  return route_partitions(s, t, &ix, proj_s, proj_t, plan).partitions;
}

EquiJoinOutcome filtered_equi_join(const Table& s, const Table& t,
                                   std::span<const std::string> keep_s,
                                   std::span<const std::string> keep_t,
                                   const EquiJoinOptions& options,
                                   const WorkerPool& pool) {
  options.plan.validate();
  options.grid.validate();
  const auto proj_s = make_projection(s, keep_s);
  const auto proj_t = make_projection(t, keep_t);

  EquiJoinOutcome outcome;
  auto& stats = outcome.stats;
  stats.tuples_in = s.cardinality() + t.cardinality();

  auto t0 = Clock::now();
  if (options.prefilter) {
    outcome.intersection = round1_key_intersection(s, t, options.plan, pool);
    stats.intersection_size = outcome.intersection.size();
  }
  stats.round1_ms = elapsed_ms(t0);

  auto routed =
      route_partitions(s, t, options.prefilter ? &outcome.intersection : nullptr,
                       proj_s, proj_t, options.plan);
  stats.round2_map_ms = routed.map_ms;
  stats.shuffle_ms = routed.shuffle_ms;
  stats.n_groups = routed.n_groups;
  stats.n_partitions = routed.partitions.size();
  stats.s_counts.assign(options.plan.n_reducers, 0);
  stats.t_counts.assign(options.plan.n_reducers, 0);
  for (const auto& p : routed.partitions) {
    stats.s_counts[p.reducer_index] = p.nb_s;
    stats.t_counts[p.reducer_index] = p.nb_t;
    stats.tuples_after_filter += p.nb_s + p.nb_t;
  }
  stats.estimate = estimate_result_size(stats.s_counts, stats.t_counts,
                                        s.cardinality(), t.cardinality());

  t0 = Clock::now();
  std::vector<JoinResult> parts(routed.partitions.size());
  pool.parallel_for(parts.size(), [&](std::size_t i) {
    parts[i] = join_partition(routed.partitions[i], options, pool);
  });
  for (auto& p : parts) outcome.result.append(std::move(p));
  stats.kernel = outcome.result.stats;
  stats.reduce_join_ms = elapsed_ms(t0);
  return outcome;
}

}  // namespace gridjoin
