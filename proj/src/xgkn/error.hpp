#pragma once

#include <stdexcept>
#include <string>

namespace xgkn {

// Mirrored one-to-one by xgkn_status in the C API.
enum class ErrorCode {
  kInvalidArgument = 1,
  kInvalidNode,
  kEmptySelection,
  kIncompatibleSets,
  kFeatureDim,
  kShape,
  kNumeric,
  kState,
  kStatistics,
  kIo,
  kFormat,
  kSplit,
  kCapacity,
  kAnchor,
  kTrainingDiverged,
  kMissingGroundTruth,
  kUndefinedMetric,
  kAlignment,
  kTrace,
};

const char* error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) fail(code, message);
}

}  // namespace xgkn
