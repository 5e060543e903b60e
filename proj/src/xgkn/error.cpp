#include "xgkn/error.hpp"

namespace xgkn {

const char* error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kInvalidNode: return "invalid-node";
    case ErrorCode::kEmptySelection: return "empty-selection";
    case ErrorCode::kIncompatibleSets: return "incompatible-sets";
    case ErrorCode::kFeatureDim: return "feature-dim";
    case ErrorCode::kShape: return "shape";
    case ErrorCode::kNumeric: return "numeric";
    case ErrorCode::kState: return "state";
    case ErrorCode::kStatistics: return "statistics";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kFormat: return "format";
    case ErrorCode::kSplit: return "split";
    case ErrorCode::kCapacity: return "capacity";
    case ErrorCode::kAnchor: return "anchor";
    case ErrorCode::kTrainingDiverged: return "training-diverged";
    case ErrorCode::kMissingGroundTruth: return "missing-ground-truth";
    case ErrorCode::kUndefinedMetric: return "undefined-metric";
    case ErrorCode::kAlignment: return "alignment";
    case ErrorCode::kTrace: return "trace";
  }
  return "unknown";
}

}  // namespace xgkn
