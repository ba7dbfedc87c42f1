#include "gridjoin/common.hpp"

namespace gridjoin {

std::string_view to_string(Tag tag) { return tag == Tag::S ? "S" : "T"; }

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedRow: return "MalformedRow";
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::UnknownColumn: return "UnknownColumn";
    case ErrorCode::KeyDropped: return "KeyDropped";
    case ErrorCode::InvalidSchema: return "InvalidSchema";
    case ErrorCode::InvalidTable: return "InvalidTable";
    case ErrorCode::ReducerPanic: return "ReducerPanic";
    case ErrorCode::BucketOverflow: return "BucketOverflow";
    case ErrorCode::SlotOverflow: return "SlotOverflow";
    case ErrorCode::InvalidGrid: return "InvalidGrid";
    case ErrorCode::UnsupportedCondition: return "UnsupportedCondition";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::TooLarge: return "TooLarge";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message,
             std::optional<std::int64_t> detail)
    : std::runtime_error(std::string(to_string(code)) + ": " + message),
      code_(code),
      detail_(detail) {}

}  // namespace gridjoin
