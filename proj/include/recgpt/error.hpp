#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace recgpt {

enum class ErrorCode {
  kMissingField,
  kRatingOutOfRange,
  kMalformedTimestamp,
  kUnresolvedItem,
  kUnreadableSource,
  kFormatMismatch,
  kInvalidDescriptor,
  kInvalidTemplate,
  kUnknownTemplateField,
  kEntryExceedsBudget,
  kHistoryTooShort,
  kMissingLabelRating,
  kBadRatios,
  kEmptyText,
  kEmptyCatalog,
  kEmptyInput,
  kAllFailed,
  kBackendUnreachable,
  kBackendRejected,
  kTimeout,
  kInvalidParams,
  kInvalidConfig,
  kIo,
};

const char* to_string(ErrorCode code);

// Every module reports failures through this type. `detail` carries the
// numeric payload some codes need (entry index, HTTP status).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::int64_t detail = 0);

  ErrorCode code() const noexcept { return code_; }
  std::int64_t detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::int64_t detail_;
};

}  // namespace recgpt
