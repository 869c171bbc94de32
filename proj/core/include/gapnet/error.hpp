// Copyright 2026 The gapnet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gapnet {

/// Every contract violation the library reports. One exception type carries
/// the code so callers can switch on it (the CLI maps codes to exit statuses).
enum class ErrorCode {
  kShapeMismatch,
  kKernelTooLong,
  kRankError,
  kNonFinite,
  kNoCachedForward,
  kInvalidRate,
  kNonDeterministicFragment,
  kSpecInvalid,
  kBadMagic,
  kUnsupportedVersion,
  kTruncatedPayload,
  kUnsupportedDtype,
  kIoFailure,
  kParseError,
  kDuplicateId,
  kEmptyImage,
  kInvalidExtent,
  kNonSquareRotation,
  kTargetUnreachable,
  kBadFractions,
  kEmptySplit,
  kDivergedLoss,
  kLengthMismatch,
  kEmptyInput,
  kEmptyMatrix,
  kConfigInvalid,
  kCheckpointMismatch,
  kMissingResource,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace gapnet
