#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cvtslr {

enum class ErrorCode {
  kDimensionMismatch,
  kNotScalar,
  kGraphConsumed,
  kNonFinite,
  kEmptySequence,
  kUnknownGlossId,
  kNotNormalized,
  kInfeasibleTarget,
  kEmptyTarget,
  kTooLarge,
  kNonPositiveSigma,
  kLengthMismatch,
  kAllMasked,
  kBatchMismatch,
  kNegativeWeight,
  kEmptyReferenceCorpus,
  kInvalidConfig,
  kParseError,
  kUnknownGloss,
  kBadMagic,
  kTruncatedFile,
  kShapeMismatch,
  kCorpusMissing,
  kCheckpointIncompatible,
  kSplitMissing,
  kSampleMissing,
  kIoError,
  kInvariantViolation,
};

std::string_view error_code_name(ErrorCode code);

// Single exception type for the library; callers dispatch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

}  // namespace cvtslr
