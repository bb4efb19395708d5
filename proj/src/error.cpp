// Copyright 2026 The tabscout Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "tabscout/error.hpp"

namespace tabscout {

std::string_view error_code_name(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::kRaggedTable: return "RaggedTable";
        case ErrorCode::kEmptyTable: return "EmptyTable";
        case ErrorCode::kDuplicateId: return "DuplicateId";
        case ErrorCode::kEmptyPool: return "EmptyPool";
        case ErrorCode::kDanglingQrel: return "DanglingQrel";
        case ErrorCode::kGradeOutOfRange: return "GradeOutOfRange";
        case ErrorCode::kMissingKeyColumn: return "MissingKeyColumn";
        case ErrorCode::kUnknownColumn: return "UnknownColumn";
        case ErrorCode::kMissingCondition: return "MissingCondition";
        case ErrorCode::kMissingQueryTable: return "MissingQueryTable";
        case ErrorCode::kInvalidQuery: return "InvalidQuery";
        case ErrorCode::kIoError: return "IoError";
        case ErrorCode::kParseError: return "ParseError";
        case ErrorCode::kProviderUnavailable: return "ProviderUnavailable";
        case ErrorCode::kDimMismatch: return "DimMismatch";
        case ErrorCode::kCorruptIndex: return "CorruptIndex";
        case ErrorCode::kUnsupportedVersion: return "UnsupportedVersion";
        case ErrorCode::kInvalidArgument: return "InvalidArgument";
        case ErrorCode::kEmptyCandidate: return "EmptyCandidate";
        case ErrorCode::kInvalidWeight: return "InvalidWeight";
        case ErrorCode::kEmptyBatch: return "EmptyBatch";
        case ErrorCode::kDivergenceDetected: return "DivergenceDetected";
        case ErrorCode::kCorruptCheckpoint: return "CorruptCheckpoint";
        case ErrorCode::kIndexNotReady: return "IndexNotReady";
        case ErrorCode::kUnknownTable: return "UnknownTable";
        case ErrorCode::kNotFound: return "NotFound";
        case ErrorCode::kConflict: return "Conflict";
    }
    return "Unknown";
}

}  // namespace tabscout
