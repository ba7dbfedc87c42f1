#include "gridjoin/mapreduce.hpp"

namespace gridjoin {

void ShufflePlan::validate() const {
  if (n_reducers < 1)
    throw Error(ErrorCode::InvalidConfig, "n_reducers must be >= 1");
  if (alpha < 1) throw Error(ErrorCode::InvalidConfig, "alpha must be >= 1");
}

std::size_t reducer_for_group(Key group_key, std::size_t n_reducers) {
  return static_cast<std::size_t>(
      static_cast<std::uint64_t>(nonneg_hash(group_key)) % n_reducers);
}

GroupRoute route_group(Key join_key, const ShufflePlan& plan) {
  plan.validate();
  const Key group = floor_div(join_key, plan.alpha);
  return {group, reducer_for_group(group, plan.n_reducers)};
}

}  // namespace gridjoin
