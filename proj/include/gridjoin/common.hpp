#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace gridjoin {

/// Join keys are fixed-width signed integers; payloads are never inspected.
using Key = std::int64_t;
using Value = std::variant<std::int64_t, std::string>;
using Row = std::vector<Value>;

/// Origin of a tuple flowing through a shuffle. S sorts before T.
enum class Tag : std::uint8_t { S = 0, T = 1 };

std::string_view to_string(Tag tag);

enum class ErrorCode {
  MalformedRow,
  MissingColumn,
  UnknownColumn,
  KeyDropped,
  InvalidSchema,
  InvalidTable,
  ReducerPanic,
  BucketOverflow,
  SlotOverflow,
  InvalidGrid,
  UnsupportedCondition,
  EmptyInput,
  TooLarge,
  InvalidConfig,
  Io,
};

std::string_view to_string(ErrorCode code);

/// Every module reports failures through this exception. `detail` carries the
/// offending line number, bucket index or group key where one exists.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message,
        std::optional<std::int64_t> detail = std::nullopt);

  ErrorCode code() const noexcept { return code_; }
  std::optional<std::int64_t> detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::optional<std::int64_t> detail_;
};

inline constexpr std::uint64_t kFnvOffsetBasis = 0xcbf29ce484222325ULL;
inline constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

/// Seed used by the shuffle router.
inline constexpr std::uint64_t kShuffleHashSeed = kFnvOffsetBasis;
/// Seed used by device hash buckets; differs from the router so that
/// reducer skew and bucket skew are uncorrelated.
inline constexpr std::uint64_t kBucketHashSeed =
    kFnvOffsetBasis ^ 0x9e3779b97f4a7c15ULL;

/// FNV-1a over the 8 little-endian bytes of `key`, masked to non-negative.
constexpr std::int64_t nonneg_hash(Key key,
                                   std::uint64_t seed = kShuffleHashSeed) {
  std::uint64_t h = seed;
  const auto bits = static_cast<std::uint64_t>(key);
  for (int i = 0; i < 8; ++i) {
    h ^= (bits >> (8 * i)) & 0xffU;
    h *= kFnvPrime;
  }
  return static_cast<std::int64_t>(h & 0x7fffffffffffffffULL);
}

/// Floor division (rounds toward negative infinity).
constexpr Key floor_div(Key a, Key b) {
  Key q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

}  // namespace gridjoin
