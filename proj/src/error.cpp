#include "recgpt/error.hpp"

namespace recgpt {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMissingField: return "MissingField";
    case ErrorCode::kRatingOutOfRange: return "RatingOutOfRange";
    case ErrorCode::kMalformedTimestamp: return "MalformedTimestamp";
    case ErrorCode::kUnresolvedItem: return "UnresolvedItem";
    case ErrorCode::kUnreadableSource: return "UnreadableSource";
    case ErrorCode::kFormatMismatch: return "FormatMismatch";
    case ErrorCode::kInvalidDescriptor: return "InvalidDescriptor";
    case ErrorCode::kInvalidTemplate: return "InvalidTemplate";
    case ErrorCode::kUnknownTemplateField: return "UnknownTemplateField";
    case ErrorCode::kEntryExceedsBudget: return "EntryExceedsBudget";
    case ErrorCode::kHistoryTooShort: return "HistoryTooShort";
    case ErrorCode::kMissingLabelRating: return "MissingLabelRating";
    case ErrorCode::kBadRatios: return "BadRatios";
    case ErrorCode::kEmptyText: return "EmptyText";
    case ErrorCode::kEmptyCatalog: return "EmptyCatalog";
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kAllFailed: return "AllFailed";
    case ErrorCode::kBackendUnreachable: return "BackendUnreachable";
    case ErrorCode::kBackendRejected: return "BackendRejected";
    case ErrorCode::kTimeout: return "Timeout";
    case ErrorCode::kInvalidParams: return "InvalidParams";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kIo: return "Io";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message, std::int64_t detail)
    : std::runtime_error(std::string(to_string(code)) + ": " + message),
      code_(code),
      detail_(detail) {}

}  // namespace recgpt
