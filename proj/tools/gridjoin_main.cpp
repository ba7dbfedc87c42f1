// gridjoin: command-line driver for the join engine.
//
//   gridjoin join  --algo hash --left s.csv --right t.csv --left-key key ...
//   gridjoin gen   --rows N --key-max M --divisor D --cols W --seed S --out f.csv
//   gridjoin sweep --alphas 1,10,100 <join flags>

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "gridjoin/engine.hpp"

namespace {

using namespace gridjoin;

struct JoinFlags {
  std::string algo = "hash";
  std::string op = "eq";
  std::string left, right, left_key, right_key;
  std::vector<std::string> project;
  std::int64_t alpha = 0;
  std::size_t reducers = 8;
  std::string grid = "4,4,8,8";
  std::uint64_t device_threads = 30720;
  std::size_t quantiles = 4;
  std::string out, metrics, dump_intersection;
  std::uint64_t seed = 0;
  bool oracle = false;
  bool no_prefilter = false;
  std::size_t buckets = 0;
  std::size_t bucket_capacity = 16;
  std::size_t workers = WorkerPool::default_size();
};

void add_join_flags(CLI::App& cmd, JoinFlags& f, bool require_out) {
  cmd.add_option("--algo", f.algo, "nested | hash | theta")
      ->check(CLI::IsMember({"nested", "hash", "theta"}));
  cmd.add_option("--op", f.op, "eq | gt | ge | lt | le | ne")
      ->check(CLI::IsMember({"eq", "gt", "ge", "lt", "le", "ne"}));
  cmd.add_option("--left", f.left, "S table (CSV)")->required();
  cmd.add_option("--right", f.right, "T table (CSV)")->required();
  cmd.add_option("--left-key", f.left_key, "join key column of S")->required();
  cmd.add_option("--right-key", f.right_key, "join key column of T")
      ->required();
  cmd.add_option("--project", f.project,
                 "columns to keep (left.<c>/right.<c> to pick a side)")
      ->delimiter(',');
  cmd.add_option("--alpha", f.alpha,
                 "group key divisor (default 100 nested, 10000 hash)");
  cmd.add_option("--reducers", f.reducers, "number of reducers");
  cmd.add_option("--grid", f.grid, "blocks and threads as m,n,x,y");
  cmd.add_option("--device-threads", f.device_threads,
                 "total threads of the virtual device");
  cmd.add_option("--quantiles", f.quantiles, "theta-join buckets per axis");
  auto* out = cmd.add_option("--out", f.out, "result CSV");
  if (require_out) out->required();
  cmd.add_option("--metrics", f.metrics, "metrics JSON");
  cmd.add_flag("--oracle", f.oracle, "compare against a brute-force join");
  cmd.add_option("--dump-intersection", f.dump_intersection,
                 "write the round-one key intersection");
  cmd.add_option("--seed", f.seed, "run seed");
  cmd.add_flag("--no-prefilter", f.no_prefilter,
               "ship every tuple to the reducers");
  cmd.add_option("--buckets", f.buckets, "hash buckets (0 = automatic)");
  cmd.add_option("--bucket-capacity", f.bucket_capacity,
                 "initial entries per hash bucket");
  cmd.add_option("--workers", f.workers, "worker threads");
}

GridConfig parse_grid(const std::string& text, std::uint64_t device_threads) {
  std::vector<std::size_t> dims;
  std::stringstream in(text);
  std::string part;
  while (std::getline(in, part, ',')) {
    try {
      dims.push_back(static_cast<std::size_t>(std::stoull(part)));
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidGrid, "bad grid '" + text + "'");
    }
  }
  if (dims.size() != 4)
    throw Error(ErrorCode::InvalidGrid, "grid must be m,n,x,y: '" + text + "'");
  GridConfig grid{dims[0], dims[1], dims[2], dims[3], device_threads};
  grid.validate();
  return grid;
}

EngineConfig to_config(const JoinFlags& f) {
  EngineConfig c;
  c.algo = parse_algo(f.algo);
  c.op = JoinCondition{parse_join_op(f.op)};
  if (f.alpha != 0) c.alpha = f.alpha;
  c.n_reducers = f.reducers;
  c.grid = parse_grid(f.grid, f.device_threads);
  c.quantiles_k = f.quantiles;
  c.left_path = f.left;
  c.right_path = f.right;
  c.left_key = f.left_key;
  c.right_key = f.right_key;
  c.out_path = f.out;
  c.metrics_path = f.metrics;
  c.dump_intersection_path = f.dump_intersection;
  c.seed = f.seed;
  c.oracle_check = f.oracle;
  c.prefilter = !f.no_prefilter;
  c.hash_buckets = f.buckets;
  c.bucket_capacity = f.bucket_capacity;
  c.workers = f.workers;
  c.validate();
  if (!f.project.empty()) {
    const auto [keep_s, keep_t] = resolve_projection(
        f.project, infer_schema(c.left_path, c.left_key),
        infer_schema(c.right_path, c.right_key));
    c.keep_s = keep_s;
    c.keep_t = keep_t;
  }
  return c;
}

void report(const RunOutcome& outcome) {
  for (const auto& w : outcome.warnings) std::cerr << "warning: " << w << '\n';
  const auto& m = outcome.metrics;
  std::cout << "result rows: " << m.result_count
            << "  (estimate " << m.r_size_estimate << ", "
            << m.tuples_after_filter << "/" << m.tuples_in
            << " tuples joined)\n";
  if (outcome.oracle_match)
    std::cout << "oracle: " << (*outcome.oracle_match ? "MATCH" : "MISMATCH")
              << '\n';
}

int fail(ErrorCode code, const std::string& message,
         std::optional<std::int64_t> detail = std::nullopt) {
  nlohmann::json err{{"code", std::string(to_string(code))},
                     {"message", message}};
  if (detail) err["detail"] = *detail;
  std::cerr << nlohmann::json{{"error", err}}.dump() << '\n';
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pre-filtered map-reduce joins on a virtual device grid"};
  app.require_subcommand(1);

  JoinFlags join_flags;
  auto* join = app.add_subcommand("join", "run one join");
  add_join_flags(*join, join_flags, /*require_out=*/true);

  std::size_t rows = 0, cols = 1;
  std::int64_t key_max = 1, divisor = 1;
  std::uint64_t gen_seed = 0;
  std::string gen_out;
  auto* gen = app.add_subcommand("gen", "generate a synthetic table");
  gen->add_option("--rows", rows, "row count")->required();
  gen->add_option("--key-max", key_max, "keys drawn from [0, key-max)")
      ->required();
  gen->add_option("--divisor", divisor, "keys are divided by this")
      ->default_val(1);
  gen->add_option("--cols", cols, "payload text columns")->default_val(1);
  gen->add_option("--seed", gen_seed, "generator seed")->default_val(0);
  gen->add_option("--out", gen_out, "output CSV")->required();

  JoinFlags sweep_flags;
  std::vector<std::int64_t> alphas;
  auto* sweep = app.add_subcommand("sweep", "time one equi join per alpha");
  sweep->add_option("--alphas", alphas, "alpha values")
      ->delimiter(',')
      ->required();
  add_join_flags(*sweep, sweep_flags, /*require_out=*/false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*join) {
      const auto outcome = run_pipeline(to_config(join_flags));
      report(outcome);
      if (outcome.oracle_match && !*outcome.oracle_match) return 3;
    } else if (*gen) {
      write_table_csv(gen_synthetic(rows, key_max, divisor, cols, gen_seed),
                      gen_out);
    } else if (*sweep) {
      auto config = to_config(sweep_flags);
      const auto s = load_table(config.left_path,
                                infer_schema(config.left_path, config.left_key));
      const auto t = load_table(
          config.right_path, infer_schema(config.right_path, config.right_key));
      const auto csv = sweep_csv(sweep_alpha(s, t, config, alphas));
      if (sweep_flags.out.empty()) {
        std::cout << csv;
      } else {
        std::ofstream out(sweep_flags.out);
        out << csv;
        if (!out) return fail(ErrorCode::Io, "cannot write " + sweep_flags.out);
      }
    }
  } catch (const Error& e) {
    return fail(e.code(), e.what(), e.detail());
  } catch (const std::exception& e) {
    return fail(ErrorCode::Io, e.what());
  }
  return 0;
}
