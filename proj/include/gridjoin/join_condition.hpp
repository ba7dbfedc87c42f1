#pragma once

#include <string_view>

#include "gridjoin/common.hpp"

namespace gridjoin {

enum class JoinOp { Eq, Gt, Ge, Lt, Le, Ne };

/// Comparison of an S-side key against a T-side key: `s op t`.
struct JoinCondition {
  JoinOp op = JoinOp::Eq;

  constexpr bool operator()(Key s, Key t) const {
    switch (op) {
      case JoinOp::Eq: return s == t;
      case JoinOp::Gt: return s > t;
      case JoinOp::Ge: return s >= t;
      case JoinOp::Lt: return s < t;
      case JoinOp::Le: return s <= t;
      case JoinOp::Ne: return s != t;
    }
    return false;
  }

  friend bool operator==(const JoinCondition&, const JoinCondition&) = default;
};

std::string_view to_string(JoinOp op);
/// Parses eq|gt|ge|lt|le|ne.
JoinOp parse_join_op(std::string_view text);

}  // namespace gridjoin
