// Copyright 2026 The Data Portrait Authors
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

#include "dataportrait/error.hpp"

namespace dataportrait {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kParamsMismatch: return "params-mismatch";
    case ErrorCode::kBadMagic: return "bad-magic";
    case ErrorCode::kVersionUnsupported: return "version-unsupported";
    case ErrorCode::kTruncatedStream: return "truncated-stream";
    case ErrorCode::kChecksumMismatch: return "checksum-mismatch";
    case ErrorCode::kCorruptPayload: return "corrupt-payload";
    case ErrorCode::kSourceIo: return "source-io-error";
    case ErrorCode::kEmptyInput: return "empty-input";
  }
  return "unknown";
}

}  // namespace dataportrait
