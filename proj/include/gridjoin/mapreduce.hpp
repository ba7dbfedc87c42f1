#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <tuple>
#include <type_traits>
#include <utility>
#include <vector>

#include "gridjoin/common.hpp"

namespace gridjoin {

/// A projected tuple travelling through a shuffle with its origin tag.
struct TaggedTuple {
  Key key = 0;
  Tag tag = Tag::S;
  Row payload;

  friend bool operator==(const TaggedTuple&, const TaggedTuple&) = default;
};

/// k reducers and the key divisor alpha used to form group keys.
struct ShufflePlan {
  std::size_t n_reducers = 1;
  std::int64_t alpha = 1;

  void validate() const;
};

struct GroupRoute {
  Key group_key;
  std::size_t reducer;

  friend bool operator==(const GroupRoute&, const GroupRoute&) = default;
};

std::size_t reducer_for_group(Key group_key, std::size_t n_reducers);

/// group = floor(join_key / alpha); reducer = nonneg_hash(group) mod k.
GroupRoute route_group(Key join_key, const ShufflePlan& plan);

/// Bounded pool of workers. Indices are handed out dynamically, so callers
/// must write results into per-index storage to stay deterministic.
class WorkerPool {
 public:
  explicit WorkerPool(std::size_t workers = default_size())
      : workers_(std::max<std::size_t>(1, workers)) {}

  static std::size_t default_size() {
    return std::max(1u, std::thread::hardware_concurrency());
  }
  std::size_t size() const noexcept { return workers_; }

  /// Runs fn(i) for i in [0, n). Rethrows the exception of the lowest
  /// failing index after all workers have joined.
  template <class Fn>
  void parallel_for(std::size_t n, Fn&& fn) const {
    if (n == 0) return;
    const std::size_t width = std::min(workers_, n);
    if (width == 1) {
      for (std::size_t i = 0; i < n; ++i) fn(i);
      return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(n);
    auto drain = [&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    };
    {
      std::vector<std::jthread> threads;
      threads.reserve(width - 1);
      for (std::size_t w = 1; w < width; ++w) threads.emplace_back(drain);
      drain();
    }
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

 private:
  std::size_t workers_;
};

template <class V>
struct Group {
  Key key;
  std::vector<V> values;
};

/// Shuffle output: for each reducer, its groups in ascending key order.
/// Inside a group, values are ordered by (tag, input index, emission order).
template <class V>
struct Shuffled {
  std::vector<std::vector<Group<V>>> reducers;
  std::size_t n_emissions = 0;

  std::size_t n_groups() const {
    std::size_t n = 0;
    for (const auto& r : reducers) n += r.size();
    return n;
  }
};

template <class V>
class Emitter {
 public:
  void emit(Key group_key, V value, Tag tag = Tag::S) {
    out_.push_back({group_key, tag, input_, seq_++, std::move(value)});
  }

 private:
  template <class R, class W, class M>
  friend Shuffled<W> map_and_shuffle(std::span<const R>, M&&, std::size_t);

  struct Record {
    Key group_key;
    Tag tag;
    std::size_t input;
    std::size_t seq;
    V value;
  };
  std::vector<Record> out_;
  std::size_t input_ = 0;
  std::size_t seq_ = 0;
};

/// Sequential map over `inputs` followed by a deterministic shuffle.
/// `map_fn(const Record&, Emitter<V>&)` emits (group key, value, tag).
template <class Record, class V, class MapFn>
Shuffled<V> map_and_shuffle(std::span<const Record> inputs, MapFn&& map_fn,
                            std::size_t n_reducers) {
  if (n_reducers == 0)
    throw Error(ErrorCode::InvalidConfig, "n_reducers must be >= 1");
  Emitter<V> emitter;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    emitter.input_ = i;
    map_fn(inputs[i], emitter);
  }
  auto& records = emitter.out_;

  struct Slot {
    std::size_t reducer;
    Key key;
    Tag tag;
    std::size_t input;
    std::size_t seq;
    std::size_t pos;
  };
  std::vector<Slot> order;
  order.reserve(records.size());
  for (std::size_t p = 0; p < records.size(); ++p) {
    const auto& r = records[p];
    order.push_back({reducer_for_group(r.group_key, n_reducers), r.group_key,
                     r.tag, r.input, r.seq, p});
  }
  std::sort(order.begin(), order.end(), [](const Slot& a, const Slot& b) {
    return std::tie(a.reducer, a.key, a.tag, a.input, a.seq) <
           std::tie(b.reducer, b.key, b.tag, b.input, b.seq);
  });

  Shuffled<V> out;
  out.reducers.resize(n_reducers);
  out.n_emissions = records.size();
  for (const auto& s : order) {
    auto& groups = out.reducers[s.reducer];
    if (groups.empty() || groups.back().key != s.key)
      groups.push_back({s.key, {}});
    groups.back().values.push_back(std::move(records[s.pos].value));
  }
  return out;
}

/// Full map/shuffle/reduce round. `reduce_fn(Key, std::span<const V>)`
/// returns a vector of outputs; reducers run concurrently on `pool`, groups
/// of one reducer run in ascending key order on a single worker. Output order
/// is (reducer index, group key, emission order). A throwing reduce_fn
/// surfaces as ReducerPanic carrying the group key.
template <class Record, class V, class MapFn, class ReduceFn>
auto run_map_reduce(std::span<const Record> inputs, MapFn&& map_fn,
                    ReduceFn&& reduce_fn, const ShufflePlan& plan,
                    const WorkerPool& pool) {
  plan.validate();
  using Out = typename std::invoke_result_t<ReduceFn&, Key,
                                            std::span<const V>>::value_type;
  auto shuffled = map_and_shuffle<Record, V>(
      inputs, std::forward<MapFn>(map_fn), plan.n_reducers);

  std::vector<std::vector<Out>> per_reducer(plan.n_reducers);
  std::vector<std::optional<std::pair<Key, std::string>>> panics(
      plan.n_reducers);
  pool.parallel_for(plan.n_reducers, [&](std::size_t r) {
    for (const auto& group : shuffled.reducers[r]) {
      try {
        auto out = reduce_fn(group.key, std::span<const V>(group.values));
        for (auto& o : out) per_reducer[r].push_back(std::move(o));
      } catch (const std::exception& e) {
        panics[r] = std::make_pair(group.key, std::string(e.what()));
        return;
      }
    }
  });
  for (const auto& p : panics)
    if (p)
      throw Error(ErrorCode::ReducerPanic,
                  "reduce failed for group " + std::to_string(p->first) +
                      ": " + p->second,
                  p->first);

  std::vector<Out> merged;
  for (auto& outs : per_reducer)
    for (auto& o : outs) merged.push_back(std::move(o));
  return merged;
}

}  // namespace gridjoin
