// Copyright 2026 The gapnet Authors
// SPDX-License-Identifier: Apache-2.0

#include "gapnet/error.hpp"

namespace gapnet {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kKernelTooLong: return "KernelTooLong";
    case ErrorCode::kRankError: return "RankError";
    case ErrorCode::kNonFinite: return "NonFinite";
    case ErrorCode::kNoCachedForward: return "NoCachedForward";
    case ErrorCode::kInvalidRate: return "InvalidRate";
    case ErrorCode::kNonDeterministicFragment: return "NonDeterministicFragment";
    case ErrorCode::kSpecInvalid: return "SpecInvalid";
    case ErrorCode::kBadMagic: return "BadMagic";
    case ErrorCode::kUnsupportedVersion: return "UnsupportedVersion";
    case ErrorCode::kTruncatedPayload: return "TruncatedPayload";
    case ErrorCode::kUnsupportedDtype: return "UnsupportedDtype";
    case ErrorCode::kIoFailure: return "IoFailure";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kDuplicateId: return "DuplicateId";
    case ErrorCode::kEmptyImage: return "EmptyImage";
    case ErrorCode::kInvalidExtent: return "InvalidExtent";
    case ErrorCode::kNonSquareRotation: return "NonSquareRotation";
    case ErrorCode::kTargetUnreachable: return "TargetUnreachable";
    case ErrorCode::kBadFractions: return "BadFractions";
    case ErrorCode::kEmptySplit: return "EmptySplit";
    case ErrorCode::kDivergedLoss: return "DivergedLoss";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kEmptyMatrix: return "EmptyMatrix";
    case ErrorCode::kConfigInvalid: return "ConfigInvalid";
    case ErrorCode::kCheckpointMismatch: return "CheckpointMismatch";
    case ErrorCode::kMissingResource: return "MissingResource";
  }
  return "Unknown";
}

}  // namespace gapnet
