#include "gridjoin/thetajoin.hpp"

#include <algorithm>
#include <chrono>

namespace gridjoin {

namespace {

double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now() - since)
      .count();
}

}  // namespace

std::string_view to_string(RegionClass c) {
  switch (c) {
    case RegionClass::Green: return "green";
    case RegionClass::Red: return "red";
    case RegionClass::White: return "white";
  }
  return "?";
}

std::size_t RegionMatrix::bucket_of(Key key) const {
  return static_cast<std::size_t>(
      std::upper_bound(boundaries.begin(), boundaries.end(), key) -
      boundaries.begin());
}

RegionMatrix compute_bucket_boundaries(std::span<const Key> s_keys,
                                       std::span<const Key> t_keys,
                                       std::size_t k) {
  if (k < 1) throw Error(ErrorCode::InvalidConfig, "quantile count must be >= 1");
  std::vector<Key> merged;
  merged.reserve(s_keys.size() + t_keys.size());
  merged.insert(merged.end(), s_keys.begin(), s_keys.end());
  merged.insert(merged.end(), t_keys.begin(), t_keys.end());
  if (merged.empty())
    throw Error(ErrorCode::EmptyInput, "no keys to derive quantiles from");
  std::sort(merged.begin(), merged.end());

  RegionMatrix matrix;
  matrix.requested_k = k;
  const std::size_t n = merged.size();
  for (std::size_t i = 1; i < k; ++i) {
    // ceil(n * i / k), clamped to the last element
    const std::size_t pos = std::min((n * i + k - 1) / k, n - 1);
    const Key cut = merged[pos];
    // A cut at the minimum would leave bucket 0 empty.
    if (cut == merged.front()) continue;
    if (!matrix.boundaries.empty() && matrix.boundaries.back() == cut) continue;
    matrix.boundaries.push_back(cut);
  }
  matrix.k = matrix.boundaries.size() + 1;
  matrix.degenerate = merged.front() == merged.back();
  return matrix;
}

RegionMatrix compute_bucket_boundaries(const Table& s, const Table& t,
                                       std::size_t k) {
  std::vector<Key> s_keys, t_keys;
  s_keys.reserve(s.cardinality());
  t_keys.reserve(t.cardinality());
  for (std::size_t i = 0; i < s.cardinality(); ++i) s_keys.push_back(s.key(i));
  for (std::size_t i = 0; i < t.cardinality(); ++i) t_keys.push_back(t.key(i));
  return compute_bucket_boundaries(s_keys, t_keys, k);
}

RegionClass classify_region(RegionId id, JoinCondition op) {
  const auto x = id.x, y = id.y;
  switch (op.op) {
    case JoinOp::Gt:
    case JoinOp::Ge:
      // GE ties on a shared boundary fall on the diagonal, which stays Red.
      return x > y ? RegionClass::Green
                   : (x == y ? RegionClass::Red : RegionClass::White);
    case JoinOp::Lt:
    case JoinOp::Le:
      return x < y ? RegionClass::Green
                   : (x == y ? RegionClass::Red : RegionClass::White);
    case JoinOp::Ne:
      return x != y ? RegionClass::Green : RegionClass::Red;
    case JoinOp::Eq:
      break;
  }
  throw Error(ErrorCode::UnsupportedCondition,
              "region matrix joins need a non-equality condition");
}

std::vector<RegionId> theta_regions(Key key, Tag tag,
                                    const RegionMatrix& matrix,
                                    JoinCondition op) {
  const std::size_t b = matrix.bucket_of(key);
  std::vector<RegionId> out;
  for (std::size_t other = 0; other < matrix.k; ++other) {
    const RegionId id = tag == Tag::S ? RegionId{b, other} : RegionId{other, b};
    if (classify_region(id, op) != RegionClass::White) out.push_back(id);
  }
  return out;
}

std::vector<std::pair<RegionId, TaggedTuple>> theta_map(
    const TaggedTuple& tuple, const RegionMatrix& matrix, JoinCondition op) {
  std::vector<std::pair<RegionId, TaggedTuple>> out;
  for (auto id : theta_regions(tuple.key, tuple.tag, matrix, op))
    out.emplace_back(id, tuple);
  return out;
}

JoinResult cross_join(std::span<const Row> s_part,
                      std::span<const Row> t_part) {
  JoinResult result;
  result.rows.reserve(s_part.size() * t_part.size());
  for (const auto& s : s_part)
    for (const auto& t : t_part) {
      Row row;
      row.reserve(s.size() + t.size());
      row.insert(row.end(), s.begin(), s.end());
      row.insert(row.end(), t.begin(), t.end());
      result.rows.push_back(std::move(row));
    }
  result.total = result.rows.size();
  result.per_thread_counts.emplace_back(0, result.total);
  return result;
}

JoinResult theta_reduce(RegionId id, std::span<const TaggedTuple> tuples,
                        JoinCondition op, const GridConfig& grid,
                        const Schema& s_schema, const Schema& t_schema,
                        const WorkerPool& pool) {
  std::vector<Row> s_rows, t_rows;
  for (const auto& t : tuples)
    (t.tag == Tag::S ? s_rows : t_rows).push_back(t.payload);

  switch (classify_region(id, op)) {
    case RegionClass::Red: {
      const auto s_block = to_columnar(s_schema, s_rows);
      const auto t_block = to_columnar(t_schema, t_rows);
      const auto plan = plan_nested_loop(s_block.n_rows, t_block.n_rows, grid);
      return nested_loop_kernel(s_block, t_block, plan, op, pool);
    }
    case RegionClass::Green:
      return cross_join(s_rows, t_rows);
    case RegionClass::White:
      break;
  }
  return {};
}

ThetaJoinOutcome theta_join(const Table& s, const Table& t, JoinCondition op,
                            std::size_t quantiles_k, std::size_t n_reducers,
                            const GridConfig& grid, const WorkerPool& pool) {
  if (op.op == JoinOp::Eq)
    throw Error(ErrorCode::UnsupportedCondition,
                "theta join does not accept eq; use an equi-join algorithm");
  grid.validate();
  ThetaJoinOutcome outcome;
  auto& stats = outcome.stats;
  stats.requested_k = quantiles_k;
  stats.tuples_in = s.cardinality() + t.cardinality();
  if (stats.tuples_in == 0) return outcome;

  auto t0 = std::chrono::steady_clock::now();
  const auto matrix = compute_bucket_boundaries(s, t, quantiles_k);
  stats.effective_k = matrix.k;
  stats.degenerate_domain = matrix.degenerate;
  for (std::size_t x = 0; x < matrix.k; ++x)
    for (std::size_t y = 0; y < matrix.k; ++y) switch (classify_region({x, y}, op)) {
        case RegionClass::Green: ++stats.regions_green; break;
        case RegionClass::Red: ++stats.regions_red; break;
        case RegionClass::White: ++stats.regions_white; break;
      }

  std::vector<TaggedTuple> inputs;
  inputs.reserve(stats.tuples_in);
  for (std::size_t i = 0; i < s.cardinality(); ++i)
    inputs.push_back({s.key(i), Tag::S, s.rows()[i]});
  for (std::size_t i = 0; i < t.cardinality(); ++i)
    inputs.push_back({t.key(i), Tag::T, t.rows()[i]});
  stats.map_ms = elapsed_ms(t0);

  t0 = std::chrono::steady_clock::now();
  const auto k = static_cast<Key>(matrix.k);
  auto shuffled = map_and_shuffle<TaggedTuple, TaggedTuple>(
      inputs,
      [&](const TaggedTuple& tuple, Emitter<TaggedTuple>& out) {
        for (auto id : theta_regions(tuple.key, tuple.tag, matrix, op))
          out.emit(static_cast<Key>(id.x) * k + static_cast<Key>(id.y), tuple,
                   tuple.tag);
      },
      std::max<std::size_t>(1, n_reducers));
  stats.tuples_replicated = shuffled.n_emissions;
  stats.n_groups = shuffled.n_groups();
  for (const auto& groups : shuffled.reducers)
    for (const auto& g : groups) {
      const auto n_s = static_cast<std::uint64_t>(std::count_if(
          g.values.begin(), g.values.end(),
          [](const TaggedTuple& v) { return v.tag == Tag::S; }));
      stats.r_size_bound += n_s * (g.values.size() - n_s);
    }
  stats.shuffle_ms = elapsed_ms(t0);

  t0 = std::chrono::steady_clock::now();
  std::vector<std::vector<std::pair<Key, JoinResult>>> per_reducer(
      shuffled.reducers.size());
  pool.parallel_for(shuffled.reducers.size(), [&](std::size_t r) {
    for (const auto& group : shuffled.reducers[r]) {
      const RegionId id{static_cast<std::size_t>(group.key / k),
                        static_cast<std::size_t>(group.key % k)};
      per_reducer[r].emplace_back(
          group.key, theta_reduce(id, group.values, op, grid, s.schema(),
                                  t.schema(), pool));
    }
  });

  std::vector<std::pair<Key, JoinResult>> regions;
  for (auto& r : per_reducer)
    for (auto& g : r) regions.push_back(std::move(g));
  std::sort(regions.begin(), regions.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  for (auto& [key, part] : regions) {
    const RegionId id{static_cast<std::size_t>(key / k),
                      static_cast<std::size_t>(key % k)};
    if (classify_region(id, op) == RegionClass::Green)
      stats.pairs_emitted_untested += part.total;
    outcome.result.append(std::move(part));
  }
  stats.pairs_tested = outcome.result.stats.pairs_tested;
  stats.kernel = outcome.result.stats;
  stats.reduce_ms = elapsed_ms(t0);
  return outcome;
}

}  // namespace gridjoin
