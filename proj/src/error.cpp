#include "cvtslr/error.hpp"

namespace cvtslr {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kNotScalar: return "NotScalar";
    case ErrorCode::kGraphConsumed: return "GraphConsumed";
    case ErrorCode::kNonFinite: return "NonFinite";
    case ErrorCode::kEmptySequence: return "EmptySequence";
    case ErrorCode::kUnknownGlossId: return "UnknownGlossId";
    case ErrorCode::kNotNormalized: return "NotNormalized";
    case ErrorCode::kInfeasibleTarget: return "InfeasibleTarget";
    case ErrorCode::kEmptyTarget: return "EmptyTarget";
    case ErrorCode::kTooLarge: return "TooLarge";
    case ErrorCode::kNonPositiveSigma: return "NonPositiveSigma";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kAllMasked: return "AllMasked";
    case ErrorCode::kBatchMismatch: return "BatchMismatch";
    case ErrorCode::kNegativeWeight: return "NegativeWeight";
    case ErrorCode::kEmptyReferenceCorpus: return "EmptyReferenceCorpus";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kUnknownGloss: return "UnknownGloss";
    case ErrorCode::kBadMagic: return "BadMagic";
    case ErrorCode::kTruncatedFile: return "TruncatedFile";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kCorpusMissing: return "CorpusMissing";
    case ErrorCode::kCheckpointIncompatible: return "CheckpointIncompatible";
    case ErrorCode::kSplitMissing: return "SplitMissing";
    case ErrorCode::kSampleMissing: return "SampleMissing";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kInvariantViolation: return "InvariantViolation";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code) {}

void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace cvtslr
