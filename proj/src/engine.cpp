#include "gridjoin/engine.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace gridjoin {

std::string_view to_string(Algo algo) {
  switch (algo) {
    case Algo::NestedLoop: return "nested";
    case Algo::Hash: return "hash";
    case Algo::Theta: return "theta";
  }
  return "?";
}

Algo parse_algo(std::string_view text) {
  for (auto a : {Algo::NestedLoop, Algo::Hash, Algo::Theta})
    if (to_string(a) == text) return a;
  throw Error(ErrorCode::InvalidConfig,
              "unknown algorithm '" + std::string(text) + "'");
}

std::int64_t EngineConfig::effective_alpha() const {
  if (alpha) return *alpha;
  return algo == Algo::NestedLoop ? kDefaultNestedLoopAlpha : kDefaultHashAlpha;
}

void EngineConfig::validate() const {
  if (algo == Algo::Theta && op.op == JoinOp::Eq)
    throw Error(ErrorCode::InvalidConfig,
                "theta join needs a non-equality condition (gt|ge|lt|le|ne)");
  if (algo != Algo::Theta && op.op != JoinOp::Eq)
    throw Error(ErrorCode::InvalidConfig,
                std::string(to_string(algo)) + " join only supports eq");
  if (effective_alpha() < 1)
    throw Error(ErrorCode::InvalidConfig, "alpha must be >= 1");
  if (n_reducers < 1)
    throw Error(ErrorCode::InvalidConfig, "reducers must be >= 1");
  if (quantiles_k < 1)
    throw Error(ErrorCode::InvalidConfig, "quantiles must be >= 1");
  if (bucket_capacity < 1)
    throw Error(ErrorCode::InvalidConfig, "bucket capacity must be >= 1");
  grid.validate();
}

namespace {

nlohmann::json deterministic_fields(const RunMetrics& m) {
  return {
      {"algo", m.algo},
      {"op", m.op},
      {"alpha", m.alpha},
      {"n_reducers", m.n_reducers},
      {"tuples_in", m.tuples_in},
      {"tuples_after_filter", m.tuples_after_filter},
      {"result_count", m.result_count},
      {"r_size_estimate", m.r_size_estimate},
      {"peak_slot_bytes", m.peak_slot_bytes},
      {"bytes_staged_to_device", m.bytes_staged_to_device},
      {"kernel_launches", m.kernel_launches},
      {"intersection_size", m.intersection_size},
      {"effective_groups", m.effective_groups},
      {"regions_green", m.regions_green},
      {"regions_red", m.regions_red},
      {"regions_white", m.regions_white},
      {"tuples_replicated", m.tuples_replicated},
      {"pairs_tested", m.pairs_tested},
      {"pairs_emitted_untested", m.pairs_emitted_untested},
      {"effective_k", m.effective_k},
      {"hierarchy_product", m.hierarchy_product},
      {"hierarchy_device_threads", m.hierarchy_device_threads},
      {"hierarchy_admitted", m.hierarchy_admitted},
      {"hierarchy_factor", m.hierarchy_factor},
  };
}

std::vector<Row> sorted_rows(std::vector<Row> rows) {
  std::sort(rows.begin(), rows.end());
  return rows;
}

std::vector<std::string> all_columns(const Schema& schema) {
  std::vector<std::string> names;
  for (const auto& c : schema.columns()) names.push_back(c.name);
  return names;
}

}  // namespace

nlohmann::json to_json(const RunMetrics& m) {
  auto j = deterministic_fields(m);
  j["round1_ms"] = m.round1_ms;
  j["round2_map_ms"] = m.round2_map_ms;
  j["shuffle_ms"] = m.shuffle_ms;
  j["reduce_join_ms"] = m.reduce_join_ms;
  return j;
}

nlohmann::json deterministic_json(const RunMetrics& m) {
  return deterministic_fields(m);
}

std::pair<std::vector<std::string>, std::vector<std::string>>
resolve_projection(std::span<const std::string> names, const Schema& left,
                   const Schema& right) {
  if (names.empty()) return {all_columns(left), all_columns(right)};
  std::vector<bool> keep_l(left.size(), false), keep_r(right.size(), false);
  keep_l[left.key_column()] = true;
  keep_r[right.key_column()] = true;
  for (const auto& name : names) {
    std::string_view n = name;
    bool want_l = true, want_r = true;
    if (n.starts_with("left.")) {
      n.remove_prefix(5);
      want_r = false;
    } else if (n.starts_with("right.")) {
      n.remove_prefix(6);
      want_l = false;
    }
    const auto li = want_l ? left.index_of(n) : std::nullopt;
    const auto ri = want_r ? right.index_of(n) : std::nullopt;
    if (!li && !ri)
      throw Error(ErrorCode::UnknownColumn, "unknown column '" + name + "'");
    if (li) keep_l[*li] = true;
    if (ri) keep_r[*ri] = true;
  }
  std::pair<std::vector<std::string>, std::vector<std::string>> out;
  for (std::size_t i = 0; i < left.size(); ++i)
    if (keep_l[i]) out.first.push_back(left.columns()[i].name);
  for (std::size_t i = 0; i < right.size(); ++i)
    if (keep_r[i]) out.second.push_back(right.columns()[i].name);
  return out;
}

RunOutcome execute_join(const Table& s, const Table& t,
                        const EngineConfig& config) {
  config.validate();
  const WorkerPool pool(config.workers);
  const auto keep_s =
      config.keep_s.empty() ? all_columns(s.schema()) : config.keep_s;
  const auto keep_t =
      config.keep_t.empty() ? all_columns(t.schema()) : config.keep_t;

  RunOutcome outcome;
  auto& m = outcome.metrics;
  m.algo = to_string(config.algo);
  m.op = to_string(config.op.op);
  m.alpha = config.effective_alpha();
  m.n_reducers = config.n_reducers;

  const auto hierarchy = check_thread_hierarchy(config.n_reducers, config.grid);
  m.hierarchy_product = hierarchy.product;
  m.hierarchy_device_threads = hierarchy.device_total_threads;
  m.hierarchy_admitted = hierarchy.admitted;
  m.hierarchy_factor = hierarchy.factor;
  if (!hierarchy.admitted) {
    std::ostringstream msg;
    msg << "thread hierarchy exceeds the device: " << hierarchy.product
        << " logical threads >= " << hierarchy.device_total_threads
        << " (factor " << hierarchy.factor << "); threads will be time-sliced";
    outcome.warnings.push_back(msg.str());
  }

  // Projections are validated even when nothing survives the join.
  const auto s_proj = project(s, keep_s);
  const auto t_proj = project(t, keep_t);
  for (const auto& c : s_proj.schema().columns())
    outcome.result_columns.push_back({"s." + c.name, c.kind});
  for (const auto& c : t_proj.schema().columns())
    outcome.result_columns.push_back({"t." + c.name, c.kind});

  if (config.algo == Algo::Theta) {
    auto theta = theta_join(s_proj, t_proj, config.op, config.quantiles_k,
                            config.n_reducers, config.grid, pool);
    const auto& st = theta.stats;
    m.round2_map_ms = st.map_ms;
    m.shuffle_ms = st.shuffle_ms;
    m.reduce_join_ms = st.reduce_ms;
    m.tuples_in = st.tuples_in;
    m.tuples_after_filter = st.tuples_in;
    m.effective_groups = st.n_groups;
    m.regions_green = st.regions_green;
    m.regions_red = st.regions_red;
    m.regions_white = st.regions_white;
    m.tuples_replicated = st.tuples_replicated;
    m.pairs_tested = st.pairs_tested;
    m.pairs_emitted_untested = st.pairs_emitted_untested;
    m.effective_k = st.effective_k;
    m.r_size_estimate = st.r_size_bound;
    m.peak_slot_bytes = st.kernel.peak_slot_bytes;
    m.bytes_staged_to_device = st.kernel.bytes_staged;
    m.kernel_launches = st.kernel.launches;
    if (st.degenerate_domain)
      outcome.warnings.push_back(
          "all join keys are equal; region matrix collapsed to k=1");
    outcome.result = std::move(theta.result);
  } else {
    EquiJoinOptions options;
    options.algo = config.algo == Algo::NestedLoop ? EquiAlgo::NestedLoop
                                                   : EquiAlgo::Hash;
    options.plan = {config.n_reducers, config.effective_alpha()};
    options.grid = config.grid;
    options.hash_buckets = config.hash_buckets;
    options.bucket_capacity = config.bucket_capacity;
    options.prefilter = config.prefilter;
    auto equi = filtered_equi_join(s, t, keep_s, keep_t, options, pool);
    const auto& st = equi.stats;
    m.round1_ms = st.round1_ms;
    m.round2_map_ms = st.round2_map_ms;
    m.shuffle_ms = st.shuffle_ms;
    m.reduce_join_ms = st.reduce_join_ms;
    m.tuples_in = st.tuples_in;
    m.tuples_after_filter = st.tuples_after_filter;
    m.r_size_estimate = st.estimate.r_size;
    m.intersection_size = st.intersection_size;
    m.effective_groups = st.n_groups;
    m.pairs_tested = st.kernel.pairs_tested;
    m.peak_slot_bytes = st.kernel.peak_slot_bytes;
    m.bytes_staged_to_device = st.kernel.bytes_staged;
    m.kernel_launches = st.kernel.launches;
    if (config.prefilter) outcome.intersection = std::move(equi.intersection);
    outcome.result = std::move(equi.result);
  }
  m.result_count = outcome.result.total;

  if (config.oracle_check) {
    try {
      const auto oracle = oracle_join(s_proj, t_proj, config.op);
      outcome.oracle_match = same_multiset(outcome.result.rows, oracle.rows);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::TooLarge) throw;
      outcome.warnings.push_back(std::string("oracle skipped: ") + e.what());
    }
  }
  return outcome;
}

RunOutcome run_pipeline(const EngineConfig& config) {
  config.validate();
  const auto s = load_table(config.left_path,
                            infer_schema(config.left_path, config.left_key));
  const auto t = load_table(config.right_path,
                            infer_schema(config.right_path, config.right_key));
  auto outcome = execute_join(s, t, config);
  if (!config.out_path.empty()) write_result_csv(outcome, config.out_path);
  if (!config.metrics_path.empty()) {
    std::ofstream out(config.metrics_path);
    if (!out)
      throw Error(ErrorCode::Io, "cannot write " + config.metrics_path.string());
    out << to_json(outcome.metrics).dump(2) << '\n';
  }
  if (!config.dump_intersection_path.empty() && outcome.intersection)
    write_intersection(*outcome.intersection, config.dump_intersection_path);
  return outcome;
}

void write_result_csv(const RunOutcome& outcome,
                      const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  std::string buf;
  for (std::size_t c = 0; c < outcome.result_columns.size(); ++c) {
    if (c) buf += ',';
    buf += outcome.result_columns[c].name;
  }
  buf += '\n';
  for (const auto& row : outcome.result.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) buf += ',';
      if (const auto* i = std::get_if<std::int64_t>(&row[c]))
        buf += std::to_string(*i);
      else
        buf += std::get<std::string>(row[c]);
    }
    buf += '\n';
    if (buf.size() > (1u << 20)) {
      out << buf;
      buf.clear();
    }
  }
  out << buf;
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

void write_intersection(const KeyIntersection& ix,
                        const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  for (Key k : ix.keys) out << k << '\n';
}

JoinResult oracle_join(const Table& s, const Table& t, JoinCondition op) {
  const auto pairs =
      static_cast<std::uint64_t>(s.cardinality()) * t.cardinality();
  if (pairs > kOraclePairLimit)
    throw Error(ErrorCode::TooLarge,
                std::to_string(pairs) + " candidate pairs exceed the oracle limit");
  JoinResult result;
  for (const auto& srow : s.rows()) {
    const Key sk = std::get<std::int64_t>(srow[s.schema().key_column()]);
    for (const auto& trow : t.rows()) {
      const Key tk = std::get<std::int64_t>(trow[t.schema().key_column()]);
      if (!op(sk, tk)) continue;
      Row row = srow;
      row.insert(row.end(), trow.begin(), trow.end());
      result.rows.push_back(std::move(row));
    }
  }
  std::sort(result.rows.begin(), result.rows.end());
  result.total = result.rows.size();
  result.per_thread_counts.emplace_back(0, result.total);
  return result;
}

bool same_multiset(std::vector<Row> rows, const std::vector<Row>& sorted) {
  if (rows.size() != sorted.size()) return false;
  return sorted_rows(std::move(rows)) == sorted;
}

std::vector<SweepRow> sweep_alpha(const Table& s, const Table& t,
                                  const EngineConfig& config,
                                  std::span<const std::int64_t> alphas) {
  if (config.algo == Algo::Theta)
    throw Error(ErrorCode::InvalidConfig, "alpha sweep needs an equi-join algorithm");
  std::vector<SweepRow> rows;
  for (auto alpha : alphas) {
    auto run = config;
    run.alpha = alpha;
    run.oracle_check = false;
    const auto outcome = execute_join(s, t, run);
    rows.push_back({alpha, outcome.metrics.total_ms(),
                    outcome.metrics.reduce_join_ms,
                    outcome.metrics.effective_groups});
  }
  return rows;
}

std::string sweep_csv(std::span<const SweepRow> rows) {
  std::ostringstream out;
  out << "alpha,total_ms,reduce_ms,effective_groups\n";
  for (const auto& r : rows)
    out << r.alpha << ',' << r.total_ms << ',' << r.reduce_ms << ','
        << r.effective_groups << '\n';
  return out.str();
}

}  // namespace gridjoin
