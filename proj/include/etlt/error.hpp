// Copyright 2026 The ETLT Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace etlt {

enum class ErrorCode {
  kInvalidInput,
  kInvalidArgument,
  kShape,
  kConfiguration,
  kUnsupported,
  kUndefinedMetric,
  kInsufficientData,
  kFormat,
  kCorruption,
  kIo,
};

const char* error_code_name(ErrorCode code);

// Single exception type for the toolkit; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidInput: return "invalid input";
    case ErrorCode::kInvalidArgument: return "invalid argument";
    case ErrorCode::kShape: return "shape error";
    case ErrorCode::kConfiguration: return "configuration error";
    case ErrorCode::kUnsupported: return "unsupported operation";
    case ErrorCode::kUndefinedMetric: return "undefined metric";
    case ErrorCode::kInsufficientData: return "insufficient data";
    case ErrorCode::kFormat: return "format error";
    case ErrorCode::kCorruption: return "corruption error";
    case ErrorCode::kIo: return "I/O error";
  }
  return "error";
}

}  // namespace etlt
