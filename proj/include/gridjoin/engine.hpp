#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "gridjoin/join_condition.hpp"
#include "gridjoin/prefilter.hpp"
#include "gridjoin/relation.hpp"
#include "gridjoin/thetajoin.hpp"
#include "gridjoin/vgpu.hpp"

namespace gridjoin {

enum class Algo { NestedLoop, Hash, Theta };

std::string_view to_string(Algo algo);
Algo parse_algo(std::string_view text);

inline constexpr std::int64_t kDefaultNestedLoopAlpha = 100;
inline constexpr std::int64_t kDefaultHashAlpha = 10000;
/// Beyond this many candidate pairs the oracle refuses to run.
inline constexpr std::uint64_t kOraclePairLimit = 100'000'000;

struct EngineConfig {
  Algo algo = Algo::Hash;
  JoinCondition op{JoinOp::Eq};
  /// Unset: 100 for nested loop, 10000 for hash.
  std::optional<std::int64_t> alpha;
  std::size_t n_reducers = 8;
  GridConfig grid{4, 4, 8, 8};
  std::size_t quantiles_k = 4;
  /// Empty keeps every column of that side.
  std::vector<std::string> keep_s;
  std::vector<std::string> keep_t;
  std::filesystem::path left_path;
  std::filesystem::path right_path;
  std::string left_key;
  std::string right_key;
  std::filesystem::path out_path;
  std::filesystem::path metrics_path;
  std::filesystem::path dump_intersection_path;
  std::uint64_t seed = 0;
  bool oracle_check = false;
  bool prefilter = true;
  std::size_t hash_buckets = 0;
  std::size_t bucket_capacity = 16;
  std::size_t workers = WorkerPool::default_size();

  std::int64_t effective_alpha() const;
  /// Rejects eq for theta and non-eq for the equi pipelines.
  void validate() const;
};

/// Flat run report; every field except the *_ms timings is deterministic.
struct RunMetrics {
  std::string algo;
  std::string op;
  std::int64_t alpha = 0;
  std::size_t n_reducers = 0;
  double round1_ms = 0.0;
  double round2_map_ms = 0.0;
  double shuffle_ms = 0.0;
  double reduce_join_ms = 0.0;
  std::uint64_t tuples_in = 0;
  std::uint64_t tuples_after_filter = 0;
  std::uint64_t result_count = 0;
  std::uint64_t r_size_estimate = 0;
  std::uint64_t peak_slot_bytes = 0;
  std::uint64_t bytes_staged_to_device = 0;
  std::uint64_t kernel_launches = 0;
  std::size_t intersection_size = 0;
  std::size_t effective_groups = 0;
  std::size_t regions_green = 0;
  std::size_t regions_red = 0;
  std::size_t regions_white = 0;
  std::uint64_t tuples_replicated = 0;
  std::uint64_t pairs_tested = 0;
  std::uint64_t pairs_emitted_untested = 0;
  std::size_t effective_k = 0;
  std::uint64_t hierarchy_product = 0;
  std::uint64_t hierarchy_device_threads = 0;
  bool hierarchy_admitted = false;
  double hierarchy_factor = 0.0;

  double total_ms() const {
    return round1_ms + round2_map_ms + shuffle_ms + reduce_join_ms;
  }
};

nlohmann::json to_json(const RunMetrics& metrics);
/// Same object without the timing fields.
nlohmann::json deterministic_json(const RunMetrics& metrics);

struct RunOutcome {
  JoinResult result;
  std::vector<ColumnSpec> result_columns;
  RunMetrics metrics;
  std::optional<KeyIntersection> intersection;
  std::vector<std::string> warnings;
  /// Set when an oracle comparison ran.
  std::optional<bool> oracle_match;
};

/// Splits a --project list into per-side keep lists. Names may be qualified
/// as left.<col> / right.<col>; bare names apply to every side that has
/// them. Key columns are always kept. Empty input keeps everything.
std::pair<std::vector<std::string>, std::vector<std::string>>
resolve_projection(std::span<const std::string> names, const Schema& left,
                   const Schema& right);

/// Runs the configured join on in-memory tables; nothing is written.
RunOutcome execute_join(const Table& s, const Table& t,
                        const EngineConfig& config);

/// Loads inputs, runs, and writes result CSV, metrics JSON and the optional
/// intersection dump named in `config`.
RunOutcome run_pipeline(const EngineConfig& config);

void write_result_csv(const RunOutcome& outcome,
                      const std::filesystem::path& path);
void write_intersection(const KeyIntersection& ix,
                        const std::filesystem::path& path);

/// Sequential double loop over the raw tables, rows sorted. Throws TooLarge
/// past kOraclePairLimit candidate pairs.
JoinResult oracle_join(const Table& s, const Table& t, JoinCondition op);

/// Sorts a copy of `rows` and compares with the (already sorted) oracle.
bool same_multiset(std::vector<Row> rows, const std::vector<Row>& sorted);

struct SweepRow {
  std::int64_t alpha = 0;
  double total_ms = 0.0;
  double reduce_ms = 0.0;
  std::size_t effective_groups = 0;
};

/// One full equi run per alpha on the same inputs.
std::vector<SweepRow> sweep_alpha(const Table& s, const Table& t,
                                  const EngineConfig& config,
                                  std::span<const std::int64_t> alphas);
std::string sweep_csv(std::span<const SweepRow> rows);

}  // namespace gridjoin
